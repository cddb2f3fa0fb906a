"""Virial blowup certificates, shell scaling, and the dichotomy machinery.

A negative-energy state has a certified finite H1 blowup time: the
variance obeys V(t) <= b^2 + 2ct + 8Et^2 with b = ||x phi||, c = b
||phi||_{Hdot1}, so the positive root of that quadratic bounds the blowup
time from above.  Applied shell by shell to the rescaled Gaussian family
this produces windows shrinking like 2^{-5j/2}; combined with the
super-exponential shell weights it yields the e^{ck^r} trace growth and
the vanishing-window sweep that witnesses instantaneous blowup of the
truncation-regularized marginals.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .ensemble import (
    AtomicMeasure,
    GaussianProfile,
    ShellSpec,
    check_Mj_membership,
    log_moment,
    norms_from_gaussian,
    norms_from_state,
    raw_log_weight,
    truncate_measure,
)
from .grid import WaveFunction

LEMMA_CSV_COLUMNS = ["k", "log_sum", "c_fit"]
SWEEP_CSV_COLUMNS = ["R", "J_retained", "log_trace_k", "min_window"]

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class BlowupCertificate:
    """Certified upper bound on the H1 blowup time (valid only for E < 0)."""

    E: float
    b: float
    c: float
    T: Optional[float]
    valid: bool

    def quadratic_residual(self) -> float:
        """b^2 + 2cT + 8ET^2, relative to the dominant scale; ~0 when valid."""
        if not self.valid:
            raise ValueError("no root to check on an invalid certificate")
        val = self.b**2 + 2.0 * self.c * self.T + 8.0 * self.E * self.T**2
        scale = max(self.b**2, abs(8.0 * self.E) * self.T**2)
        return val / scale


def certificate_from_values(E: float, b: float, hdot1: float) -> BlowupCertificate:
    """Build the certificate from scalar inputs (analytic or synthetic)."""
    c = b * hdot1
    if not (E < 0.0) or not math.isfinite(b):
        return BlowupCertificate(E=E, b=b, c=c, T=None, valid=False)
    T = (2.0 * c + math.sqrt(4.0 * c * c + 32.0 * abs(E) * b * b)) / (16.0 * abs(E))
    return BlowupCertificate(E=E, b=b, c=c, T=T, valid=True)


def certify_blowup(phi: WaveFunction, lam: int = -1) -> BlowupCertificate:
    """Virial certificate of phi under focusing dynamics."""
    if lam != -1:
        raise ValueError("blowup certificates apply to focusing dynamics")
    n = norms_from_state(phi)
    E = 0.5 * n["Hdot1"] ** 2 - 0.25 * n["L4"] ** 4
    return certificate_from_values(E, n["weighted_x"], n["Hdot1"])


@dataclass(frozen=True)
class ShellBound:
    """Per-shell blowup window, with both published variants.

    gaussian_T: exact certificate root of the rescaled profile f_j itself
    (variance shrinks like 2^-j; valid once the shell energy is negative).
    fixed_b_root: exact positive root of the fixed-variance quadratic
    b^2 + 2tb - 8 C 2^{5j/2} t^2, which scales like 2^{-5j/4}.
    fixed_b_rate: the stated 2^{-5j/2} rate with the same prefactor b/(8C),
    used wherever a window defined for every shell is needed.
    """

    j: int
    E: float
    b: float
    c: float
    gaussian_T: Optional[float]
    fixed_b_root: float
    fixed_b_rate: float
    member: bool
    membership_reasons: tuple[str, ...]


def shell_blowup_bound(
    j: int,
    profile: GaussianProfile,
    b: Optional[float] = None,
    c_l4: float = 1.0,
) -> ShellBound:
    """Blowup window of shell j from closed-form Gaussian norms.

    The analytic path is authoritative; no grid sampling happens here, so
    arbitrarily deep shells are exact.
    """
    gn = profile.norms.rescaled(j)
    norms = norms_from_gaussian(gn)
    b_fixed = b if b is not None else 2.0 * profile.norms.weighted_x
    spec = ShellSpec(j=j, b=b_fixed, c_l4=c_l4)
    # membership from analytic norms (grid-free)
    lo, hi = spec.hdot1_bounds
    reasons = []
    in_shell = lo < norms["Hdot1"] <= hi
    if not in_shell:
        reasons.append("shell bound")
    if not norms["weighted_x"] < spec.b:
        reasons.append("variance")
    if not norms["L4"] > spec.l4_threshold:
        reasons.append("L4 lower bound")

    E = gn.energy(-1)
    cert = certificate_from_values(E, gn.weighted_x, gn.hdot1)
    # fixed-variance quadratic: b^2 + 2 t b - 8 C 2^{5j/2} t^2 with C = c_l4^4 / 8
    C = c_l4**4 / 8.0
    disc = 4.0 * b_fixed**2 + 32.0 * C * 2.0 ** (2.5 * j) * b_fixed**2
    root = (2.0 * b_fixed + math.sqrt(disc)) / (16.0 * C * 2.0 ** (2.5 * j))
    rate = b_fixed / (8.0 * C) * 2.0 ** (-2.5 * j)
    return ShellBound(
        j=j,
        E=E,
        b=gn.weighted_x,
        c=gn.weighted_x * gn.hdot1,
        gaussian_T=cert.T,
        fixed_b_root=root,
        fixed_b_rate=rate,
        member=not reasons,
        membership_reasons=tuple(reasons),
    )


def negative_energy_onset(profile: GaussianProfile) -> int:
    """Smallest j with E[f_j] < 0 under focusing dynamics."""
    j = 0
    while profile.norms.rescaled(j).energy(-1) >= 0.0:
        j += 1
        if j > 200:
            raise RuntimeError("no negative-energy shell found below j=200")
    return j


# ---------------------------------------------------------------------------
# super-exponential sum bound


@dataclass(frozen=True)
class LemmaSumRow:
    k: int
    log_sum: float
    c_k: float              # log_sum / k^r
    head_log: float         # contribution of shells j <= k^delta
    tail_log: float         # contribution of shells j > k^delta
    tail_below_one: bool


@dataclass(frozen=True)
class LemmaSumReport:
    r: float
    rows: tuple[LemmaSumRow, ...]
    c_fit: float            # smallest c with sum <= e^{c k^r} over all k checked

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(LEMMA_CSV_COLUMNS)
            for row in self.rows:
                wr.writerow([row.k, f"{row.log_sum:.17g}", f"{self.c_fit:.17g}"])


def lemma_sum_check(r: float, k_list: Sequence[int]) -> LemmaSumReport:
    """Evaluate sum_j (j^(j^(1/delta)))^(-j) 2^{2jk} in log space.

    The split at J = k^delta mirrors the proof: the head is bounded by the
    total weight times 2^{2kJ} (hence by e^{ck^r}), and the tail is checked
    to sum below 1 term by term.
    """
    if r <= 1:
        raise ValueError("r must exceed 1")
    delta = r - 1.0
    rows = []
    for k in k_list:
        if k < 4:
            raise ValueError("k values must be >= 4")
        J = int(k**delta)
        terms = []
        j = 0
        best = -math.inf
        while True:
            lt = raw_log_weight(j, delta) + 2.0 * j * k * LOG2
            terms.append(lt)
            best = max(best, lt)
            if j > max(J + 3, 2) and lt < best - 120.0:
                break
            j += 1
            if j > 10_000_000:
                raise RuntimeError("lemma sum failed to converge")
        terms = np.array(terms)
        log_sum = float(logsumexp(terms))
        head = float(logsumexp(terms[: J + 1])) if J + 1 >= 1 else -math.inf
        tail = float(logsumexp(terms[J + 1:])) if len(terms) > J + 1 else -math.inf
        rows.append(
            LemmaSumRow(
                k=k,
                log_sum=log_sum,
                c_k=log_sum / k**r,
                head_log=head,
                tail_log=tail,
                tail_below_one=tail < 0.0,
            )
        )
    c_fit = max(row.c_k for row in rows)
    return LemmaSumReport(r=r, rows=tuple(rows), c_fit=c_fit)


# ---------------------------------------------------------------------------
# instantaneous-blowup sweep


@dataclass(frozen=True)
class SweepRow:
    R: float
    J_retained: int
    log_trace_k: float
    min_window: float


@dataclass(frozen=True)
class SweepReport:
    r: float
    k: int
    shells: tuple[ShellBound, ...]
    weights: tuple[float, ...]
    rows: tuple[SweepRow, ...]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(SWEEP_CSV_COLUMNS)
            for row in self.rows:
                wr.writerow([
                    f"{row.R:.17g}", row.J_retained,
                    f"{row.log_trace_k:.17g}", f"{row.min_window:.17g}",
                ])


def min_representable_sweep_k(mu: AtomicMeasure, rel_floor: float = 1e-12) -> int:
    """Smallest k making every shell's trace increment visible in doubles.

    Adding shell j to the truncated trace changes it by roughly
    w_j H1_j^{2k} relative to w_{j-1} H1_{j-1}^{2k}; k must be large
    enough that this ratio stays above the floating-point floor for all
    consecutive shells, else "strictly increasing" is numerically vacuous.
    """
    atoms = sorted(mu.atoms, key=lambda a: a.shell)
    lw = [a.log_weight for a in atoms]
    lh = [math.log(a.h1) for a in atoms]
    target = math.log(rel_floor)

    def visible(k: int) -> bool:
        running = -math.inf
        for i in range(len(atoms)):
            term = lw[i] + 2.0 * k * lh[i]
            if i > 0 and term < running + target:
                return False
            running = max(running, term)
        return True

    k = 1
    while not visible(k):
        k *= 2
        if k > 1 << 20:
            raise RuntimeError("no representable sweep power found")
    lo, hi = k // 2, k
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if visible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def instantaneous_blowup_sweep(
    r: float,
    J: int,
    k: int,
    R_list: Sequence[float],
    profile: GaussianProfile,
    mu: Optional[AtomicMeasure] = None,
) -> SweepReport:
    """Truncate the blowup measure at growing radii R and watch the dichotomy.

    Each row reports the H1 trace of the truncated k-th marginal (log
    space) and the smallest certified blowup window among retained shells
    (the 2^{-5j/2} fixed-variance rate, defined for every shell).  Along an
    increasing R list the trace must grow and the window must shrink.
    """
    from .ensemble import build_blowup_measure  # local import avoids cycle noise

    if list(R_list) != sorted(R_list) or len(set(R_list)) != len(R_list):
        raise ValueError("R_list must be strictly increasing")
    measure = mu if mu is not None else build_blowup_measure(r, J, profile)
    shells = tuple(shell_blowup_bound(j, profile) for j in range(J + 1))
    rows = []
    for R in R_list:
        trunc = truncate_measure(measure, R)
        if not trunc.atoms:
            raise ValueError(f"R = {R} retains no atoms")
        j_max = max(a.shell for a in trunc.atoms)
        log_tr = log_moment(trunc, "H1_norm2", k)
        window = min(shells[a.shell].fixed_b_rate for a in trunc.atoms)
        rows.append(SweepRow(R=float(R), J_retained=int(j_max),
                             log_trace_k=log_tr, min_window=float(window)))
    return SweepReport(
        r=r, k=k, shells=shells,
        weights=tuple(a.weight for a in measure.atoms),
        rows=tuple(rows),
    )
