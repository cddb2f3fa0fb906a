"""Shared fixtures.

The expensive reference runs (64^3 defocusing evolution, the scattering
extraction, the focusing probes) are session-scoped so the acceptance
suite and module tests share one computation each.
"""
import numpy as np
import pytest

from gpdf.dynamics import SolverConfig, evolve
from gpdf.gaussians import gaussian_state
from gpdf.grid import BoxGrid, WaveFunction
from gpdf.observables import ObservableLogger
from gpdf.scattering import extract_scattering_state


@pytest.fixture(scope="session")
def small_grid_1d() -> BoxGrid:
    return BoxGrid(d=1, L=16.0, N=64)


@pytest.fixture(scope="session")
def small_grid_3d() -> BoxGrid:
    return BoxGrid(d=3, L=16.0, N=16)


@pytest.fixture(scope="session")
def reference_grid() -> BoxGrid:
    return BoxGrid(d=3, L=16.0, N=64)


@pytest.fixture(scope="session")
def defocusing_reference(reference_grid):
    """Resolved defocusing run: sigma=1 normalized Gaussian, dt=1e-3, T=1.

    Returns (initial state, trajectory, per-step observable records).
    """
    phi0 = gaussian_state(reference_grid, 1.0).normalize()
    logger = ObservableLogger(lam=1, every=1)
    cfg = SolverConfig(lam=1, dt_init=1e-3, t_max=1.0, snapshot_interval=0.1)
    traj = evolve(phi0, cfg, observers=[logger])
    return phi0, traj, logger.records


@pytest.fixture(scope="session")
def scattering_reference():
    """Small-amplitude scattering extraction: A=0.1, L=32, N=64, T_max=8."""
    grid = BoxGrid(d=3, L=32.0, N=64)
    phi0 = gaussian_state(grid, 1.0, 0.1)
    run = extract_scattering_state(
        phi0, t_max=8.0, levels=5,
        config=SolverConfig(lam=1, dt_init=1e-2, t_max=8.0),
    )
    return phi0, run


@pytest.fixture(scope="session")
def focusing_probe(reference_grid):
    """Focusing runs with negative-energy data; adaptive steps, no dealiasing."""
    out = {}
    for amp in (8.0, 10.0):
        phi0 = gaussian_state(reference_grid, 1.0, amp)
        cfg = SolverConfig(
            lam=-1, dt_init=1e-3, dt_policy="adaptive", t_max=2.5,
        )
        out[amp] = (phi0, evolve(phi0, cfg))
    return out
