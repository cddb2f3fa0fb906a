"""Periodic-box spectral core: grids, fields, transforms, multipliers, norms.

Conventions
-----------
Position samples live on the centered lattice x_n = -L/2 + n*h, h = L/N.
Frequency samples live on the lattice xi_m = 2*pi*m/L in FFT order,
m in {0,...,N/2-1, -N/2,...,-1} per axis.

The forward transform is unitary with respect to the quadrature pairing:
position-space norms use the weight h^d, frequency-space norms use plain
sums, and Parseval holds exactly up to roundoff.  A constant c transforms
to a single DC mode of value c * L^(d/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.fft as _fft

POSITION = "position"
FREQUENCY = "frequency"


class GridMismatchError(ValueError):
    """Two fields on different grids were combined."""


class SpaceTagError(ValueError):
    """A field's space tag does not match the requested operation."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class BoxGrid:
    """Uniform periodic box [-L/2, L/2)^d with N points per axis."""

    d: int = 3
    L: float = 16.0
    N: int = 64

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not (self.L > 0):
            raise ValueError(f"box extent must be positive, got {self.L}")
        if not _is_power_of_two(self.N) or self.N < 8:
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def quad_weight(self) -> float:
        """Quadrature weight h^d; integral of 1 over the box is exactly L^d."""
        return self.h**self.d

    @cached_property
    def x_axis(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.N)

    @cached_property
    def xi_axis(self) -> np.ndarray:
        return 2.0 * np.pi * _fft.fftfreq(self.N, d=self.h)

    def x_mesh(self) -> list[np.ndarray]:
        """Broadcastable centered position coordinates, one array per axis."""
        return [
            self.x_axis.reshape([-1 if a == ax else 1 for a in range(self.d)])
            for ax in range(self.d)
        ]

    def xi_mesh(self) -> list[np.ndarray]:
        """Broadcastable frequency coordinates in FFT order."""
        return [
            self.xi_axis.reshape([-1 if a == ax else 1 for a in range(self.d)])
            for ax in range(self.d)
        ]

    @cached_property
    def xi_sq(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for ax in self.xi_mesh():
            out = out + ax**2
        return out

    @cached_property
    def x_sq(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for ax in self.x_mesh():
            out = out + ax**2
        return out

    @cached_property
    def _center_phase(self) -> np.ndarray:
        # (-1)^m per axis: accounts for the -L/2 origin shift in the DFT.
        one = 1.0 - 2.0 * (np.arange(self.N) % 2)
        out = np.ones(self.shape)
        for ax in range(self.d):
            out = out * one.reshape([-1 if a == ax else 1 for a in range(self.d)])
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule keep-mask: modes with |m| >= N/3 per axis are dropped."""
        m = _fft.fftfreq(self.N) * self.N
        keep1d = np.abs(m) < self.N / 3.0
        out = np.ones(self.shape, dtype=bool)
        for ax in range(self.d):
            out = out & keep1d.reshape([-1 if a == ax else 1 for a in range(self.d)])
        return out

    @property
    def xi_max(self) -> float:
        return float(np.pi * self.N / self.L)


@dataclass(frozen=True)
class Field:
    """Complex samples of a one-body state, in position or frequency space."""

    grid: BoxGrid
    samples: np.ndarray
    space: str = POSITION

    def __post_init__(self):
        if self.space not in (POSITION, FREQUENCY):
            raise SpaceTagError(f"unknown space tag {self.space!r}")
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            if arr.size == self.grid.size:
                arr = arr.reshape(self.grid.shape)
            else:
                raise ValueError(
                    f"sample count {arr.size} != N^d = {self.grid.size}"
                )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def in_space(self, space: str) -> "Field":
        if space == self.space:
            return self
        return transform(self, "forward" if space == FREQUENCY else "inverse")


def zero_field(grid: BoxGrid, space: str = POSITION) -> Field:
    return Field(grid, np.zeros(grid.shape, dtype=np.complex128), space)


def constant_field(grid: BoxGrid, value: complex) -> Field:
    return Field(grid, np.full(grid.shape, value, dtype=np.complex128), POSITION)


def transform(f: Field, direction: str) -> Field:
    """Unitary-normalized DFT between position and frequency space."""
    g = f.grid
    scale = g.quad_weight / g.L ** (g.d / 2.0)
    if direction == "forward":
        if f.space != POSITION:
            raise SpaceTagError("forward transform expects a position-space field")
        out = _fft.fftn(f.samples) * (g._center_phase * scale)
        return Field(g, out, FREQUENCY)
    if direction == "inverse":
        if f.space != FREQUENCY:
            raise SpaceTagError("inverse transform expects a frequency-space field")
        out = _fft.ifftn(f.samples * (g._center_phase / scale))
        return Field(g, out, POSITION)
    raise ValueError(f"unknown direction {direction!r}")


def apply_multiplier(f: Field, symbol) -> Field:
    """Multiply by symbol(xi) in frequency space; returns the caller's space.

    `symbol` is either an ndarray over the frequency lattice or a callable
    receiving the broadcastable list of frequency axes.
    """
    g = f.grid
    if callable(symbol):
        sym = np.asarray(symbol(g.xi_mesh()))
    else:
        sym = np.asarray(symbol)
    sym = np.broadcast_to(sym, g.shape)
    if not np.all(np.isfinite(sym)):
        raise ValueError("multiplier symbol contains non-finite values")
    hat = f.in_space(FREQUENCY)
    out = Field(g, hat.samples * sym, FREQUENCY)
    return out if f.space == FREQUENCY else out.in_space(POSITION)


def laplacian_symbol(grid: BoxGrid) -> np.ndarray:
    return -grid.xi_sq


def bessel_symbol(grid: BoxGrid, alpha: float) -> np.ndarray:
    """(1 + |xi|^2)^(alpha/2), the Sobolev weight of order alpha."""
    return (1.0 + grid.xi_sq) ** (alpha / 2.0)


def dealias(f: Field) -> Field:
    """Zero the top third of modes per axis (2/3 rule)."""
    hat = f.in_space(FREQUENCY)
    out = Field(f.grid, hat.samples * f.grid.dealias_mask, FREQUENCY)
    return out if f.space == FREQUENCY else out.in_space(POSITION)


def inner_product(f: Field, g: Field) -> complex:
    """<f, g> = integral of conj(f) * g under box quadrature."""
    if f.grid is not g.grid and f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    if f.space != g.space:
        g = g.in_space(f.space)
    raw = np.vdot(f.samples, g.samples)
    if f.space == POSITION:
        raw *= f.grid.quad_weight
    return complex(raw)


def l2_norm(f: Field) -> float:
    w = f.grid.quad_weight if f.space == POSITION else 1.0
    return float(math.sqrt(w) * np.linalg.norm(f.samples))


def l4_norm(f: Field) -> float:
    pos = f.in_space(POSITION)
    return float(
        (f.grid.quad_weight * np.sum(np.abs(pos.samples) ** 4)) ** 0.25
    )


def hdot1_norm(f: Field) -> float:
    hat = f.in_space(FREQUENCY)
    return float(math.sqrt(np.sum(f.grid.xi_sq * np.abs(hat.samples) ** 2)))


def h_alpha_norm(f: Field, alpha: float) -> float:
    hat = f.in_space(FREQUENCY)
    w = (1.0 + f.grid.xi_sq) ** alpha
    return float(math.sqrt(np.sum(w * np.abs(hat.samples) ** 2)))


def weighted_x_norm(f: Field) -> float:
    """|| x f ||_L2 with coordinates centered at the box center."""
    pos = f.in_space(POSITION)
    return float(
        math.sqrt(f.grid.quad_weight * np.sum(f.grid.x_sq * np.abs(pos.samples) ** 2))
    )


_NORM_KINDS: dict[str, Callable[..., float]] = {
    "L2": lambda f, alpha=None: l2_norm(f),
    "L4": lambda f, alpha=None: l4_norm(f),
    "Hdot1": lambda f, alpha=None: hdot1_norm(f),
    "H_alpha": lambda f, alpha=None: h_alpha_norm(f, alpha),
    "weighted_x": lambda f, alpha=None: weighted_x_norm(f),
}


def norm(f: Field, kind: str, alpha: float | None = None) -> float:
    try:
        fn = _NORM_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown norm kind {kind!r}") from None
    if kind == "H_alpha" and alpha is None:
        raise ValueError("H_alpha norm requires alpha")
    return fn(f, alpha)


@dataclass(frozen=True)
class WaveFunction:
    """A one-body state phi with its L2 norm cached."""

    field: Field
    l2_norm: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.l2_norm is None:
            object.__setattr__(self, "l2_norm", l2_norm(self.field))

    @property
    def grid(self) -> BoxGrid:
        return self.field.grid

    @property
    def normalized(self) -> bool:
        return abs(self.l2_norm - 1.0) <= 1e-10

    def normalize(self) -> "WaveFunction":
        if self.l2_norm == 0.0:
            raise ValueError("cannot normalize the zero field")
        scaled = Field(
            self.field.grid, self.field.samples / self.l2_norm, self.field.space
        )
        return WaveFunction(scaled, 1.0)

    def position(self) -> Field:
        return self.field.in_space(POSITION)

    def frequency(self) -> Field:
        return self.field.in_space(FREQUENCY)
