import math

import numpy as np
import pytest

from gpdf.gaussians import GaussianNorms, gaussian_field, plane_wave
from gpdf.grid import (
    BoxGrid,
    Field,
    FREQUENCY,
    GridMismatchError,
    POSITION,
    SpaceTagError,
    WaveFunction,
    bessel_symbol,
    constant_field,
    dealias,
    h_alpha_norm,
    hdot1_norm,
    inner_product,
    l2_norm,
    l4_norm,
    norm,
    transform,
    weighted_x_norm,
    zero_field,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        BoxGrid(d=4)
    with pytest.raises(ValueError):
        BoxGrid(L=-1.0)
    with pytest.raises(ValueError):
        BoxGrid(N=24)
    with pytest.raises(ValueError):
        BoxGrid(N=4)


def test_round_trip_identity(small_grid_1d):
    rng = np.random.default_rng(7)
    f = Field(small_grid_1d, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    back = f.in_space(FREQUENCY).in_space(POSITION)
    assert np.allclose(back.samples, f.samples, atol=1e-13)


def test_parseval(small_grid_3d):
    rng = np.random.default_rng(3)
    shape = small_grid_3d.shape
    f = Field(small_grid_3d,
              rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    assert l2_norm(f) == pytest.approx(l2_norm(f.in_space(FREQUENCY)), rel=1e-13)


def test_constant_maps_to_dc_mode(small_grid_1d):
    g = small_grid_1d
    c = 0.7 - 0.2j
    hat = constant_field(g, c).in_space(FREQUENCY).samples
    assert hat[0] == pytest.approx(c * g.L ** (g.d / 2.0), rel=1e-12)
    assert np.max(np.abs(hat[1:])) < 1e-12


def test_plane_wave_maps_to_unit_mode():
    g = BoxGrid(d=2, L=8.0, N=16)
    hat = plane_wave(g, (3, -2)).in_space(FREQUENCY).samples
    assert hat[3, -2] == pytest.approx(1.0, rel=1e-12)
    hat2 = np.array(hat)
    hat2[3, -2] = 0.0
    assert np.max(np.abs(hat2)) < 1e-12


def test_space_tag_errors(small_grid_1d):
    f = zero_field(small_grid_1d, POSITION)
    with pytest.raises(SpaceTagError):
        transform(f, "inverse")
    with pytest.raises(SpaceTagError):
        Field(small_grid_1d, np.zeros(64), "momentum")


def test_grid_mismatch(small_grid_1d):
    other = BoxGrid(d=1, L=8.0, N=64)
    with pytest.raises(GridMismatchError):
        inner_product(zero_field(small_grid_1d), zero_field(other))


def test_norms_match_gaussian_closed_forms():
    g = BoxGrid(d=3, L=24.0, N=64)
    sigma, amp = 1.3, 0.8
    f = gaussian_field(g, sigma, amp)
    gn = GaussianNorms(sigma, amp, 3)
    assert l2_norm(f) == pytest.approx(gn.l2, rel=1e-10)
    assert hdot1_norm(f) == pytest.approx(gn.hdot1, rel=1e-9)
    assert l4_norm(f) == pytest.approx(gn.l4, rel=1e-10)
    assert weighted_x_norm(f) == pytest.approx(gn.weighted_x, rel=1e-9)
    assert h_alpha_norm(f, 1.0) == pytest.approx(gn.h1, rel=1e-9)


def test_h_alpha_zero_is_l2(small_grid_1d):
    f = gaussian_field(small_grid_1d, 2.0)
    assert h_alpha_norm(f, 0.0) == pytest.approx(l2_norm(f), rel=1e-12)


def test_norm_dispatcher(small_grid_1d):
    f = gaussian_field(small_grid_1d, 2.0)
    assert norm(f, "L2") == l2_norm(f)
    assert norm(f, "H_alpha", alpha=1.0) == h_alpha_norm(f, 1.0)
    with pytest.raises(ValueError):
        norm(f, "H_alpha")
    with pytest.raises(ValueError):
        norm(f, "L6")


def test_bessel_symbol_at_zero(small_grid_1d):
    sym = bessel_symbol(small_grid_1d, 2.0)
    assert sym.flat[0] == pytest.approx(1.0)


def test_dealias_removes_top_third(small_grid_1d):
    g = small_grid_1d
    rng = np.random.default_rng(0)
    f = Field(g, rng.standard_normal(64) + 0j)
    hat = dealias(f).in_space(FREQUENCY).samples
    m = np.fft.fftfreq(g.N) * g.N
    assert np.max(np.abs(hat[np.abs(m) >= g.N / 3.0])) < 1e-14


def test_inner_product_conjugate_linearity(small_grid_1d):
    rng = np.random.default_rng(1)
    a = Field(small_grid_1d, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    b = Field(small_grid_1d, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    lhs = inner_product(a, b)
    rhs = np.conj(inner_product(b, a))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert inner_product(a, a).real == pytest.approx(l2_norm(a) ** 2, rel=1e-12)


def test_wavefunction_normalization(small_grid_1d):
    f = gaussian_field(small_grid_1d, 1.0, 3.0)
    phi = WaveFunction(f)
    assert not phi.normalized
    assert phi.normalize().normalized
    with pytest.raises(ValueError):
        WaveFunction(zero_field(small_grid_1d)).normalize()
