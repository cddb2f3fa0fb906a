"""Gaussian profiles and their closed-form norms.

The normalized isotropic Gaussian of width sigma in d dimensions is

    psi_sigma(x) = (pi sigma^2)^(-d/4) exp(-|x|^2 / (2 sigma^2)),

with ||psi||_L2 = 1.  All norms used by the shell construction have closed
forms in sigma, which serve both as test oracles and as the authoritative
evaluation path for scales the grid cannot resolve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import BoxGrid, Field, POSITION, WaveFunction


def gaussian_field(
    grid: BoxGrid,
    sigma: float,
    amplitude: complex = 1.0,
    center: tuple[float, ...] | None = None,
) -> Field:
    """amplitude * psi_sigma sampled on the grid (position space)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xs = grid.x_mesh()
    if center is None:
        center = (0.0,) * grid.d
    r2 = np.zeros(grid.shape)
    for ax, c in zip(xs, center):
        r2 = r2 + (ax - c) ** 2
    norm_const = (math.pi * sigma**2) ** (-grid.d / 4.0)
    samples = amplitude * norm_const * np.exp(-r2 / (2.0 * sigma**2))
    return Field(grid, samples, POSITION)


def gaussian_state(grid: BoxGrid, sigma: float, amplitude: complex = 1.0) -> WaveFunction:
    return WaveFunction(gaussian_field(grid, sigma, amplitude))


def plane_wave(grid: BoxGrid, mode: tuple[int, ...]) -> Field:
    """e^{i xi . x} / L^(d/2) for the lattice frequency xi = 2*pi*mode/L."""
    if len(mode) != grid.d:
        raise ValueError("mode index count must match dimension")
    xs = grid.x_mesh()
    phase = np.zeros(grid.shape)
    for ax, m in zip(xs, mode):
        phase = phase + (2.0 * math.pi * m / grid.L) * ax
    samples = np.exp(1j * phase) / grid.L ** (grid.d / 2.0)
    return Field(grid, samples, POSITION)


def mode_frequency(grid: BoxGrid, mode: tuple[int, ...]) -> np.ndarray:
    return 2.0 * math.pi * np.asarray(mode, dtype=float) / grid.L


@dataclass(frozen=True)
class GaussianNorms:
    """Closed-form norms of A * psi_sigma in d dimensions."""

    sigma: float
    amplitude: float = 1.0
    d: int = 3

    @property
    def l2(self) -> float:
        return self.amplitude

    @property
    def hdot1(self) -> float:
        return self.amplitude * math.sqrt(self.d / 2.0) / self.sigma

    @property
    def h1(self) -> float:
        return math.sqrt(self.l2**2 + self.hdot1**2)

    @property
    def l4(self) -> float:
        return self.amplitude * (2.0 * math.pi * self.sigma**2) ** (-self.d / 8.0)

    @property
    def weighted_x(self) -> float:
        return self.amplitude * self.sigma * math.sqrt(self.d / 2.0)

    def energy(self, lam: int) -> float:
        """E = 1/2 ||grad phi||^2 + lam/4 ||phi||_L4^4."""
        return 0.5 * self.hdot1**2 + 0.25 * lam * self.l4**4

    def rescaled(self, j: int) -> "GaussianNorms":
        """Norms of the dyadic rescaling 2^(dj/2) phi(2^j x) = psi_{sigma/2^j}."""
        return GaussianNorms(self.sigma * 2.0**-j, self.amplitude, self.d)


def free_gaussian_variance(sigma: float, t: float, d: int = 3) -> float:
    """V[phi](t) = ||x phi_t||^2 for psi_sigma under the free flow e^{it Laplacian}.

    The frequency profile picks up the phase e^{-it|xi|^2}; the complex width
    parameter evolves as a(t) = sigma^2 + 2it, giving per-axis variance
    (sigma^4 + 4 t^2) / (2 sigma^2).
    """
    return d * (sigma**4 + 4.0 * t**2) / (2.0 * sigma**2)
