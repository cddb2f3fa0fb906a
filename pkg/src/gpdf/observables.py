"""Conserved quantities and inequality functionals along NLS flows.

Sign conventions follow the source convention P = i * integral(conj(phi) grad phi)
and L = i * integral(conj(phi) x ^ grad phi); note this is opposite to the
common physics momentum sign.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import Trajectory
from .grid import (
    Field,
    FREQUENCY,
    POSITION,
    WaveFunction,
    h_alpha_norm,
    hdot1_norm,
    l2_norm,
    l4_norm,
    weighted_x_norm,
)

CSV_COLUMNS = [
    "t", "M", "Px", "Py", "Pz", "Lx", "Ly", "Lz",
    "E", "V", "H1", "Hdot1", "L4", "virial_rate", "virial_accel",
]


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    M: float
    P: tuple[float, float, float]
    L_ang: tuple[float, float, float]
    E: float
    V: float
    H1: float
    Hdot1: float
    L4: float
    virial_rate: float
    virial_accel: float

    def row(self) -> list[float]:
        return [self.t, self.M, *self.P, *self.L_ang, self.E, self.V,
                self.H1, self.Hdot1, self.L4, self.virial_rate, self.virial_accel]


def _gradients(phi: WaveFunction) -> list[np.ndarray]:
    """Position-space gradient components via spectral differentiation."""
    hat = phi.frequency()
    g = phi.grid
    outs = []
    for ax in g.xi_mesh():
        comp = Field(g, hat.samples * (1j * ax), FREQUENCY).in_space(POSITION)
        outs.append(comp.samples)
    return outs


def _pad3(vals: Sequence[float]) -> tuple[float, float, float]:
    out = list(vals) + [0.0] * (3 - len(vals))
    return tuple(out)  # type: ignore[return-value]


def measure(phi: WaveFunction, lam: int, t: float = 0.0) -> ObservableRecord:
    g = phi.grid
    pos = phi.position().samples
    w = g.quad_weight
    conj_pos = np.conj(pos)
    grads = _gradients(phi)
    xs = g.x_mesh()

    M = w * float(np.sum(np.abs(pos) ** 2))
    P = [w * float((1j * np.sum(conj_pos * dg)).real) for dg in grads]

    L_ang: list[float] = []
    if g.d == 3:
        # x ^ grad, componentwise
        pairs = [(1, 2), (2, 0), (0, 1)]
        for a, b in pairs:
            integrand = xs[a] * grads[b] - xs[b] * grads[a]
            L_ang.append(w * float((1j * np.sum(conj_pos * integrand)).real))
    else:
        L_ang = [0.0, 0.0, 0.0]

    l4 = l4_norm(phi.field)
    hdot1 = hdot1_norm(phi.field)
    E = 0.5 * hdot1**2 + 0.25 * lam * l4**4
    V = weighted_x_norm(phi.field) ** 2
    H1 = h_alpha_norm(phi.field, 1.0)

    # dV/dt = 4 Im int x . conj(phi) grad(phi)
    acc = 0.0j
    for x_ax, dg in zip(xs, grads):
        acc += np.sum(x_ax * conj_pos * dg)
    virial_rate = 4.0 * w * float(acc.imag)
    # d2V/dt2 = 8 |grad phi|^2 + 2 d lam |phi|_{L4}^4 = 16 E + (2 d - 4) lam |phi|_{L4}^4
    virial_accel = 16.0 * E + (2.0 * g.d - 4.0) * lam * l4**4

    return ObservableRecord(
        t=t, M=M, P=_pad3(P), L_ang=_pad3(L_ang), E=E, V=V,
        H1=H1, Hdot1=hdot1, L4=l4,
        virial_rate=virial_rate, virial_accel=virial_accel,
    )


class ObservableLogger:
    """Observer callback collecting one record per accepted step."""

    def __init__(self, lam: int, every: int = 1):
        self.lam = lam
        self.every = every
        self.records: list[ObservableRecord] = []
        self._count = 0

    def __call__(self, t: float, phi: WaveFunction) -> None:
        if self._count % self.every == 0:
            self.records.append(measure(phi, self.lam, t))
        self._count += 1


def virial_consistency(records, lam: int | None = None) -> dict:
    """Centered-difference check of dV/dt and d2V/dt2 against the identities.

    Accepts either a Trajectory (observables are measured at its snapshots,
    `lam` required) or a uniformly sampled ObservableRecord series; returns
    the max relative mismatch of both comparisons.
    """
    if isinstance(records, Trajectory):
        if lam is None:
            raise ValueError("lam is required when passing a trajectory")
        records = [measure(phi, lam, t) for t, phi in records.snapshots]
    if len(records) < 5:
        raise ValueError("need at least 5 snapshots for the virial check")
    ts = np.array([r.t for r in records])
    dts = np.diff(ts)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise ValueError("virial check requires uniform snapshot spacing")
    dt = float(dts[0])
    V = np.array([r.V for r in records])
    rate = np.array([r.virial_rate for r in records])
    accel = np.array([r.virial_accel for r in records])

    fd_rate = (V[2:] - V[:-2]) / (2 * dt)
    fd_accel = (rate[2:] - rate[:-2]) / (2 * dt)
    scale_r = np.maximum(1.0, np.abs(rate[1:-1]))
    scale_a = np.maximum(1.0, np.abs(accel[1:-1]))
    rate_mismatch = float(np.max(np.abs(fd_rate - rate[1:-1]) / scale_r))
    accel_mismatch = float(np.max(np.abs(fd_accel - accel[1:-1]) / scale_a))
    return {
        "rate_mismatch": rate_mismatch,
        "accel_mismatch": accel_mismatch,
        "max_mismatch": max(rate_mismatch, accel_mismatch),
    }


def inequality_ratios(phi: WaveFunction) -> tuple[float, float]:
    """Scale-invariant Gagliardo-Nirenberg and uncertainty ratios."""
    l2 = l2_norm(phi.field)
    if l2 == 0.0:
        raise ValueError("inequality ratios are undefined for the zero field")
    hd1 = hdot1_norm(phi.field)
    gn = l4_norm(phi.field) / (hd1**0.75 * l2**0.25)
    unc = l2**2 / (weighted_x_norm(phi.field) * hd1)
    return gn, unc


def write_csv(path, records: Sequence[ObservableRecord]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for r in records:
            wr.writerow([f"{v:.17g}" for v in r.row()])
