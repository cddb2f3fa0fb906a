import csv

import numpy as np
import pytest

from gpdf.dynamics import SolverConfig, evolve, free_propagate
from gpdf.gaussians import gaussian_state, free_gaussian_variance
from gpdf.grid import BoxGrid, Field, POSITION, WaveFunction
from gpdf.observables import (
    CSV_COLUMNS,
    ObservableLogger,
    inequality_ratios,
    measure,
    virial_consistency,
    write_csv,
)


def _boost(phi: WaveFunction, v) -> WaveFunction:
    g = phi.grid
    phase = np.zeros(g.shape)
    for vk, xk in zip(v, g.x_mesh()):
        phase = phase + vk * xk
    return WaveFunction(Field(g, phi.position().samples * np.exp(1j * phase),
                              POSITION))


def test_galilean_boost_shifts_kinetic_energy():
    # boosting by e^{i v.x} adds |v|^2 M / 2 - v.P to the kinetic energy
    # (P carries the sign convention P = i int conj(phi) grad phi)
    g = BoxGrid(d=3, L=16.0, N=32)
    phi = gaussian_state(g, 1.5).normalize()
    base = measure(phi, lam=1)
    v = tuple(2.0 * np.pi * m / g.L for m in (2, -1, 3))
    boosted = measure(_boost(phi, v), lam=1)
    vdotP = sum(vk * pk for vk, pk in zip(v, base.P))
    vsq = sum(vk * vk for vk in v)
    expected = 0.5 * base.Hdot1**2 + 0.5 * vsq * base.M - vdotP
    assert 0.5 * boosted.Hdot1**2 == pytest.approx(expected, rel=1e-10)
    assert boosted.M == pytest.approx(base.M, rel=1e-12)
    assert boosted.L4 == pytest.approx(base.L4, rel=1e-12)
    for k in range(3):
        assert boosted.P[k] == pytest.approx(base.P[k] - v[k] * base.M,
                                             rel=1e-9, abs=1e-12)


def test_virial_rate_matches_free_flow():
    g = BoxGrid(d=3, L=16.0, N=32)
    phi0 = gaussian_state(g, 1.0)
    for t in (0.1, 0.25):
        rec = measure(free_propagate(phi0, t), lam=1, t=t)
        # V(t) = (3/2)(1 + 4 t^2) so dV/dt = 12 t
        assert rec.V == pytest.approx(free_gaussian_variance(1.0, t, 3),
                                      rel=1e-9)
        assert rec.virial_rate == pytest.approx(12.0 * t, rel=1e-9)


def test_virial_consistency_small_for_resolved_runs():
    for lam in (1, -1):
        g = BoxGrid(d=3, L=16.0, N=32)
        phi0 = gaussian_state(g, 1.0).normalize()
        log = ObservableLogger(lam=lam, every=1)
        evolve(phi0, SolverConfig(lam=lam, dt_init=1e-3, t_max=0.02),
               observers=[log])
        assert virial_consistency(log.records)["max_mismatch"] < 1e-6


def test_virial_consistency_input_validation(small_grid_1d):
    phi = gaussian_state(small_grid_1d, 2.0)
    recs = [measure(phi, 1, t) for t in (0.0, 0.1)]
    with pytest.raises(ValueError):
        virial_consistency(recs)
    recs = [measure(phi, 1, t) for t in (0.0, 0.1, 0.2, 0.35, 0.4)]
    with pytest.raises(ValueError):
        virial_consistency(recs)


def test_inequality_ratios_scale_invariant(small_grid_3d):
    a = gaussian_state(small_grid_3d, 1.5, 1.0)
    b = gaussian_state(small_grid_3d, 1.5, 7.0)
    ga, ua = inequality_ratios(a)
    gb, ub = inequality_ratios(b)
    assert ga == pytest.approx(gb, rel=1e-12)
    assert ua == pytest.approx(ub, rel=1e-12)
    with pytest.raises(ValueError):
        inequality_ratios(WaveFunction(Field(
            small_grid_3d, np.zeros(small_grid_3d.shape), POSITION)))


def test_conserved_quantities_drift(defocusing_reference):
    _, traj, records = defocusing_reference
    assert traj.termination == "completed"
    m0, e0 = records[0].M, records[0].E
    drift_m = max(abs(r.M - m0) / m0 for r in records)
    drift_e = max(abs(r.E - e0) / abs(e0) for r in records)
    assert drift_m < 1e-12
    assert drift_e < 1e-6


def test_write_csv_round_trip(tmp_path, small_grid_1d):
    phi = gaussian_state(small_grid_1d, 2.0)
    recs = [measure(phi, 1, t) for t in (0.0, 0.5)]
    path = tmp_path / "obs.csv"
    write_csv(path, recs)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 3
    assert float(rows[1][CSV_COLUMNS.index("M")]) == pytest.approx(recs[0].M)
