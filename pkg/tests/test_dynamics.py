import numpy as np
import pytest

from gpdf.dynamics import (
    BLOWUP_DETECTED,
    COMPLETED,
    RESOLUTION_LOST,
    SolverConfig,
    detect_blowup,
    evolve,
    free_propagate,
    strang_step,
)
from gpdf.gaussians import gaussian_state, plane_wave
from gpdf.grid import BoxGrid, Field, WaveFunction, constant_field, l2_norm


def _random_state(grid, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    samples = scale * (rng.standard_normal(grid.shape)
                       + 1j * rng.standard_normal(grid.shape))
    return WaveFunction(Field(grid, samples))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(lam=2)
    with pytest.raises(ValueError):
        SolverConfig(dt_init=0.0)
    with pytest.raises(ValueError):
        SolverConfig(dt_policy="euler")


def test_mass_conserved_to_roundoff(small_grid_1d):
    phi = _random_state(small_grid_1d)
    m0 = l2_norm(phi.field)
    for _ in range(50):
        phi = strang_step(phi, 1e-2, lam=-1)
    assert l2_norm(phi.field) == pytest.approx(m0, rel=1e-13)


def test_step_is_time_reversible(small_grid_1d):
    phi = _random_state(small_grid_1d, seed=4)
    fwd = strang_step(phi, 2e-2, lam=1)
    back = strang_step(fwd, -2e-2, lam=1)
    assert np.allclose(back.position().samples, phi.position().samples,
                       atol=1e-13)


def test_plane_wave_is_exact(small_grid_1d):
    # |phi| is constant, so both sub-flows act by global phases that
    # commute: the split solution matches exp(-i (|xi|^2 + lam A^2) t).
    g = small_grid_1d
    phi = WaveFunction(plane_wave(g, (3,)))
    amp_sq = 1.0 / g.L
    xi_sq = (2.0 * np.pi * 3 / g.L) ** 2
    dt, steps, lam = 1e-2, 37, -1
    out = phi
    for _ in range(steps):
        out = strang_step(out, dt, lam)
    exact = phi.position().samples * np.exp(
        -1j * (xi_sq + lam * amp_sq) * dt * steps)
    assert np.allclose(out.position().samples, exact, atol=1e-12)


def test_constant_field_is_exact(small_grid_1d):
    c = 0.8 + 0.3j
    phi = WaveFunction(constant_field(small_grid_1d, c))
    traj = evolve(phi, SolverConfig(lam=1, dt_init=1e-2, t_max=0.5))
    exact = c * np.exp(-1j * abs(c) ** 2 * 0.5)
    assert np.allclose(traj.final_state.position().samples, exact, atol=1e-12)


def test_free_propagate_group_property(small_grid_1d):
    phi = _random_state(small_grid_1d, seed=9)
    a = free_propagate(free_propagate(phi, 0.3), 0.4)
    b = free_propagate(phi, 0.7)
    assert np.allclose(a.position().samples, b.position().samples, atol=1e-13)
    assert l2_norm(a.field) == pytest.approx(l2_norm(phi.field), rel=1e-13)


def test_snapshots_cover_requested_times(small_grid_1d):
    phi = gaussian_state(small_grid_1d, 2.0)
    cfg = SolverConfig(lam=1, dt_init=1e-2, t_max=0.4, snapshot_interval=0.1)
    traj = evolve(phi, cfg)
    assert traj.termination == COMPLETED
    assert traj.times == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4], abs=1e-12)
    assert detect_blowup(traj) is None


def test_explicit_snapshot_times(small_grid_1d):
    phi = gaussian_state(small_grid_1d, 2.0)
    cfg = SolverConfig(lam=1, dt_init=1e-2, t_max=0.3)
    traj = evolve(phi, cfg, snapshot_times=[0.05, 0.125])
    assert traj.times == pytest.approx([0.0, 0.05, 0.125, 0.3], abs=1e-12)


def test_blowup_flag_trips_on_threshold(small_grid_1d):
    phi = gaussian_state(small_grid_1d, 2.0)
    cfg = SolverConfig(lam=1, dt_init=1e-2, t_max=1.0,
                       blowup_h1_threshold=1e-3)
    traj = evolve(phi, cfg)
    assert traj.termination == BLOWUP_DETECTED
    hit = detect_blowup(traj)
    assert hit is not None and hit[1] == BLOWUP_DETECTED
    assert traj.t_final < 1.0


def test_resolution_flag_trips_on_rough_data(small_grid_1d):
    # white noise carries a large fraction of its H1 mass in the top
    # third of the spectrum, so the guard fires immediately
    phi = _random_state(small_grid_1d, seed=2, scale=1.0)
    cfg = SolverConfig(lam=1, dt_init=1e-3, t_max=1.0, resolution_guard=0.1)
    traj = evolve(phi, cfg)
    assert traj.termination == RESOLUTION_LOST


def test_adaptive_policy_completes_smooth_run(small_grid_1d):
    phi = gaussian_state(small_grid_1d, 2.0, 0.5)
    cfg = SolverConfig(lam=-1, dt_init=5e-3, dt_policy="adaptive",
                       t_max=0.5)
    traj = evolve(phi, cfg)
    assert traj.termination == COMPLETED
    assert traj.t_final == pytest.approx(0.5)


def test_small_data_focusing_completes(small_grid_3d):
    phi = gaussian_state(small_grid_3d, 2.0, 0.2)
    cfg = SolverConfig(lam=-1, dt_init=1e-2, t_max=1.0)
    traj = evolve(phi, cfg)
    assert traj.termination == COMPLETED


def test_dealias_is_small_perturbation_on_smooth_state(small_grid_1d):
    # the cubic phase repopulates the top third of the spectrum at the
    # dt * exp(-xi^2 sigma^2 / 6) level, so the masked and unmasked steps
    # agree to well below the splitting error but not to roundoff
    phi = gaussian_state(small_grid_1d, 1.0)
    a = strang_step(phi, 1e-2, lam=1, dealias=False)
    b = strang_step(phi, 1e-2, lam=1, dealias=True)
    assert np.allclose(a.position().samples, b.position().samples, atol=5e-8)
