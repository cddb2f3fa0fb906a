import math

import numpy as np
import pytest
from scipy.special import logsumexp

from gpdf.blowup import (
    certificate_from_values,
    certify_blowup,
    instantaneous_blowup_sweep,
    lemma_sum_check,
    min_representable_sweep_k,
    negative_energy_onset,
    shell_blowup_bound,
)
from gpdf.ensemble import GaussianProfile, build_blowup_measure, raw_log_weight
from gpdf.gaussians import gaussian_state
from gpdf.grid import BoxGrid


@pytest.fixture(scope="module")
def profile():
    return GaussianProfile(BoxGrid(d=3, L=16.0, N=64), sigma=2.0)


def test_synthetic_certificate_exact_root():
    # E=-1, b=1, hdot1=1: T = (2 + sqrt(4+32)) / 16 = 1/2 exactly
    cert = certificate_from_values(-1.0, 1.0, 1.0)
    assert cert.valid
    assert cert.T == pytest.approx(0.5, abs=1e-12)
    assert abs(cert.quadratic_residual()) < 1e-10


def test_nonnegative_energy_yields_no_certificate():
    cert = certificate_from_values(0.2, 1.0, 1.0)
    assert not cert.valid and cert.T is None
    with pytest.raises(ValueError):
        cert.quadratic_residual()


def test_certificate_time_decreases_with_amplitude():
    g = BoxGrid(d=3, L=16.0, N=32)
    times = []
    for amp in (8.0, 9.0, 10.0):
        cert = certify_blowup(gaussian_state(g, 1.0, amp))
        assert cert.valid and cert.E < 0.0
        assert abs(cert.quadratic_residual()) < 1e-10
        times.append(cert.T)
    assert times[0] > times[1] > times[2]
    with pytest.raises(ValueError):
        certify_blowup(gaussian_state(g, 1.0, 10.0), lam=1)


def test_shell_scaling_is_scale_invariant(profile):
    # ||x f_j|| * ||f_j||_Hdot1 = d/2 independently of the shell
    for j in (0, 3, 10, 40):
        gn = profile.norms.rescaled(j)
        assert gn.weighted_x * gn.hdot1 == pytest.approx(1.5, rel=1e-12)


def test_negative_energy_onset(profile):
    j1 = negative_energy_onset(profile)
    assert j1 == 7
    assert profile.norms.rescaled(j1 - 1).energy(-1) >= 0.0
    assert profile.norms.rescaled(j1).energy(-1) < 0.0


def _fit_log2_slope(js, vals):
    return float(np.polyfit(js, np.log2(vals), 1)[0])


def test_shell_window_rates(profile):
    js = list(range(7, 12))
    bounds = [shell_blowup_bound(j, profile) for j in js]
    for sb in bounds:
        assert sb.gaussian_T is not None and sb.E < 0.0
    # the certificate window of f_j itself decays at least like 2^{-5j/2}
    slope_gauss = _fit_log2_slope(js, [sb.gaussian_T for sb in bounds])
    assert slope_gauss <= -2.5 + 0.1
    # the stated rate is exactly 2^{-5j/2}
    slope_rate = _fit_log2_slope(js, [sb.fixed_b_rate for sb in bounds])
    assert slope_rate == pytest.approx(-2.5, abs=1e-9)
    # the exact root of the fixed-variance quadratic decays like 2^{-5j/4}
    js_deep = list(range(20, 25))
    deep = [shell_blowup_bound(j, profile).fixed_b_root for j in js_deep]
    assert _fit_log2_slope(js_deep, deep) == pytest.approx(-1.25, abs=0.02)


def test_lemma_sum_matches_direct_summation():
    rep = lemma_sum_check(2.0, [4, 8])
    for row in rep.rows:
        direct = sum(
            math.exp(raw_log_weight(j, 1.0) + 2.0 * j * row.k * math.log(2.0))
            for j in range(60)
        )
        assert row.log_sum == pytest.approx(math.log(direct), abs=1e-12)
        assert row.tail_below_one
    assert rep.c_fit == pytest.approx(max(r.c_k for r in rep.rows))


def test_lemma_constant_stability_r15():
    rep = lemma_sum_check(1.5, [40, 80])
    c40, c80 = rep.rows[0].c_k, rep.rows[1].c_k
    assert c40 == pytest.approx(0.5404, abs=1e-3)
    assert c80 == pytest.approx(0.4962, abs=1e-3)
    assert abs(c40 - c80) / c40 < 0.10
    for row in rep.rows:
        assert row.tail_below_one
    with pytest.raises(ValueError):
        lemma_sum_check(1.0, [8])
    with pytest.raises(ValueError):
        lemma_sum_check(2.0, [2])


def test_min_representable_sweep_power(profile):
    mu2 = build_blowup_measure(2.0, 6, profile)
    assert min_representable_sweep_k(mu2) == 7
    mu15 = build_blowup_measure(1.5, 8, profile)
    assert min_representable_sweep_k(mu15) == 267


def test_sweep_dichotomy(profile):
    J, r = 6, 2.0
    mu = build_blowup_measure(r, J, profile)
    k = min_representable_sweep_k(mu)
    R_list = [1.01 * mu.atoms[j].h1 for j in range(J + 1)]
    rep = instantaneous_blowup_sweep(r, J, k, R_list, profile, mu=mu)
    assert [row.J_retained for row in rep.rows] == list(range(J + 1))
    traces = [row.log_trace_k for row in rep.rows]
    windows = [row.min_window for row in rep.rows]
    assert all(b > a for a, b in zip(traces, traces[1:]))
    assert all(b < a for a, b in zip(windows, windows[1:]))
    # independent cross-check of the truncated trace in log space
    for row in rep.rows:
        terms = [a.log_weight + 2.0 * k * math.log(a.h1)
                 for a in mu.atoms if a.h1 <= row.R]
        assert row.log_trace_k == pytest.approx(float(logsumexp(terms)),
                                                abs=1e-12)
    # the deepest retained window matches the stated 2^{-5j/2} rate
    assert rep.rows[-1].min_window == pytest.approx(
        rep.shells[J].fixed_b_rate, rel=1e-12)


def test_sweep_validation(profile):
    mu = build_blowup_measure(2.0, 3, profile)
    with pytest.raises(ValueError):
        instantaneous_blowup_sweep(2.0, 3, 4, [2.0, 1.0], profile, mu=mu)
    with pytest.raises(ValueError):
        instantaneous_blowup_sweep(2.0, 3, 4, [1e-6], profile, mu=mu)
