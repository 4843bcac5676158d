from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisogabor.geometry import (AnisoParams, PhaseGrid, PhasePoint, RegionMask, aniso_neighborhood,
                                 epsilon_conditions, feasible_epsilon_bound, fit_neighbor_ladder,
                                 fit_peetre_constant, fit_sandwich_constants, paint_boxes,
                                 separation_mu, sigma_dilate, structural_constants, theta_weight,
                                 wkm_weight)
from oracles import box_neighborhood_brute, eps_bound_sigma1, eps_bound_sigma2

SIGMAS = [(1, 3), (1, 2), (1, 1), (2, 1), (3, 1)]


def test_params_validation():
    with pytest.raises(ValueError):
        AnisoParams(2, 4)
    with pytest.raises(ValueError):
        AnisoParams(0, 1)
    with pytest.raises(ValueError):
        AnisoParams(1, 1, rho=0.0)
    assert AnisoParams(2, 1).dual() == AnisoParams(1, 2)


def test_phase_point_must_be_finite():
    with pytest.raises(ValueError):
        PhasePoint(np.nan, 0.0)


def test_theta_examples():
    assert theta_weight(AnisoParams(1, 1), PhasePoint(3, 4)) == 8.0
    assert theta_weight(AnisoParams(2, 1), PhasePoint(1, 4)) == 4.0
    assert theta_weight(AnisoParams(1, 1), PhasePoint(0, 0)) == 1.0


def test_wkm_examples():
    assert wkm_weight(AnisoParams(1, 1), PhasePoint(0, 0)) == 1.0
    assert wkm_weight(AnisoParams(2, 1), PhasePoint(1, 1)) == pytest.approx(sqrt(3.0), abs=1e-15)


def test_structural_constants():
    assert structural_constants(AnisoParams(1, 1))[:2] == (1.0, 1.0)
    assert structural_constants(AnisoParams(1, 2))[0] == 2.0
    assert structural_constants(AnisoParams(2, 1))[1] == 1.0
    assert structural_constants(AnisoParams(3, 1))[2] == 2.0 ** 5


@pytest.mark.parametrize("km,oracle", [((1, 1), eps_bound_sigma1()), ((2, 1), eps_bound_sigma2())])
def test_feasible_epsilon_closed_forms(km, oracle):
    assert feasible_epsilon_bound(AnisoParams(*km)) == pytest.approx(oracle, rel=1e-9)


@pytest.mark.parametrize("km", SIGMAS)
def test_feasible_epsilon_is_supremum(km):
    p = AnisoParams(*km)
    b = feasible_epsilon_bound(p)
    assert 0 < b < 1
    assert epsilon_conditions(p, b * (1 - 1e-9))
    assert not epsilon_conditions(p, b * (1 + 1e-6))


def test_sigma_dilate():
    p = AnisoParams(2, 1)
    assert sigma_dilate(p, PhasePoint(1, 1), 3.0) == PhasePoint(3.0, 9.0)
    z = PhasePoint(0.3, -1.7)
    assert sigma_dilate(p, z, 1.0) == z
    with pytest.raises(ValueError):
        sigma_dilate(p, z, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-5, 5), st.floats(-5, 5),
       st.sampled_from(SIGMAS))
def test_sigma_dilate_group_law(l1, l2, x, xi, km):
    p = AnisoParams(*km)
    a = sigma_dilate(p, sigma_dilate(p, PhasePoint(x, xi), l1), l2)
    b = sigma_dilate(p, PhasePoint(x, xi), l1 * l2)
    assert a.x == pytest.approx(b.x, rel=1e-12, abs=1e-12)
    assert a.xi == pytest.approx(b.xi, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("km", SIGMAS)
def test_quasi_triangle(km):
    p = AnisoParams(*km)
    cs = structural_constants(p)[0]
    rng = np.random.default_rng(1)
    x, y = rng.normal(scale=10, size=(2, 10_000))
    lhs = np.abs(x + y) ** p.inv_sigma
    rhs = cs * (np.abs(x) ** p.inv_sigma + np.abs(y) ** p.inv_sigma)
    assert np.all(lhs <= rhs * (1 + 1e-12))


@pytest.mark.parametrize("km", SIGMAS)
def test_aniso_triangle(km):
    p = AnisoParams(*km)
    bs = structural_constants(p)[1]
    rng = np.random.default_rng(2)
    z, w = rng.normal(scale=10, size=(2, 10_000, 2))
    lhs = theta_weight(p, z[:, 0] + w[:, 0], z[:, 1] + w[:, 1])
    rhs = bs * (theta_weight(p, z[:, 0], z[:, 1]) + theta_weight(p, w[:, 0], w[:, 1]))
    assert np.all(lhs <= rhs * (1 + 1e-12))


@pytest.mark.parametrize("km", SIGMAS)
@pytest.mark.parametrize("s", [-2, -1, 1, 2])
def test_peetre_constant_bounded(km, s):
    assert fit_peetre_constant(AnisoParams(*km), s) <= 16.0


@pytest.mark.parametrize("km", SIGMAS)
def test_sandwich_constants(km):
    k1, k2 = fit_sandwich_constants(AnisoParams(*km))
    assert k1 <= 4.0 and k2 <= 4.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_wkm_sandwich(k):
    # (1 + x^2k + xi^2k)^{1/2} against (1 + x^2 + xi^2)^{k/2} with c_k = 2^{2k-1}
    p = AnisoParams(k, 1)
    ck = structural_constants(p)[2]
    rng = np.random.default_rng(3)
    z = rng.normal(scale=5, size=(10_000, 2))
    w2 = 1 + z[:, 0] ** (2 * k) + z[:, 1] ** (2 * k)
    b2k = (1 + z[:, 0] ** 2 + z[:, 1] ** 2) ** k
    assert np.all(w2 <= b2k * (1 + 1e-12))
    assert np.all(b2k <= ck * w2 * (1 + 1e-12))


@pytest.mark.parametrize("km", SIGMAS)
def test_neighbor_constant_monotone(km):
    p = AnisoParams(*km)
    b = feasible_epsilon_bound(p)
    ladder = fit_neighbor_ladder(p, np.linspace(0.1, 0.9, 5) * b)
    assert np.all(np.diff(ladder) >= 0)
    assert np.isfinite(ladder[-1])


def test_singleton_neighborhood_example():
    g = PhaseGrid(4, 4, 161, 161)
    omega = RegionMask.lattice_point(g, 1.0, 0.0)
    nb = aniso_neighborhood(AnisoParams(), omega, 0.5)
    assert nb.contains(PhasePoint(1.5, 0.5))
    assert not nb.contains(PhasePoint(2.1, 0.0))
    assert nb.raster[g.index(1.5, 0.5)]
    assert not nb.raster[g.index(2.1, 0.0)]


def test_neighborhood_contains_exact_box_samples():
    # every lattice point of the exact open neighborhood must be in the raster
    g = PhaseGrid(6, 6, 121, 121)
    omega = RegionMask(lambda x, xi: (np.abs(x - 2) < 0.3) & (np.abs(xi + 1) < 0.3), g)
    p = AnisoParams(2, 1, 0.7)
    nb = aniso_neighborhood(p, omega, 0.2)
    pts = [(g.xs[i], g.xis[j]) for i, j in zip(*np.nonzero(omega.raster))]
    X, XI = g.mesh()
    q = list(zip(X.ravel()[::7], XI.ravel()[::7]))
    exact = box_neighborhood_brute(pts, 2, 1, 0.7, 0.2, q)
    assert np.all(nb.raster.ravel()[::7][exact])
    assert not np.all(nb.raster)


def test_omega_inside_its_neighborhood():
    g = PhaseGrid(8, 8, 97, 97)
    omega = RegionMask(lambda x, xi: 3 * np.abs(x) <= np.abs(xi), g)
    for eps in (0.01, 0.1, 0.3):
        nb = aniso_neighborhood(AnisoParams(), omega, eps)
        assert not (omega.raster & ~nb.raster).any()


@settings(max_examples=200, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.01, 1.0), st.sampled_from(SIGMAS), st.sampled_from([0.5, 0.8, 1.0]))
def test_conic_neighborhood_inward_invariance(y, eta, u, v, lam, km, rho):
    # if z lies in the box around y, the dilate of z lies in the box around the dilate of y
    p = AnisoParams(*km, rho)
    eps = 0.9 * feasible_epsilon_bound(p)
    th = float(theta_weight(p, y, eta))
    x = y + 0.999 * u * eps * th ** rho
    xi = eta + 0.999 * v * eps * th ** (rho * p.sigma_f)
    dz = sigma_dilate(p, PhasePoint(x, xi), lam)
    dy = sigma_dilate(p, PhasePoint(y, eta), lam)
    assert box_neighborhood_brute([(dy.x, dy.xi)], p.k, p.m, rho, eps, [(dz.x, dz.xi)])[0] or (u == 0 == v)


def test_neighborhood_errors():
    g = PhaseGrid()
    with pytest.raises(ValueError):
        aniso_neighborhood(AnisoParams(), RegionMask(lambda x, xi: x > 1e9, g), 0.1)
    with pytest.raises(ValueError):
        aniso_neighborhood(AnisoParams(), RegionMask(lambda x, xi: x > 0, g), 0.0)


def test_separation_mu_origin_example():
    g = PhaseGrid(1.6, 1.6, 256, 256)
    omega = RegionMask.lattice_point(g, 0.0, 0.0)
    p = AnisoParams()
    mu = separation_mu(p, omega, 0.1, 0.9)
    assert mu >= 0.05
    from anisogabor.geometry import _dilate_raster
    inner = aniso_neighborhood(p, omega, 0.1).raster
    outer = ~aniso_neighborhood(p, omega, 0.9).raster
    assert not (_dilate_raster(p, g, inner, mu) & _dilate_raster(p, g, outer, mu)).any()


def test_separation_mu_monotone_in_eps():
    g = PhaseGrid(1.6, 1.6, 128, 128)
    omega = RegionMask.lattice_point(g, 0.0, 0.0)
    mus = [separation_mu(AnisoParams(), omega, e, 0.9) for e in (0.1, 0.3, 0.5, 0.7)]
    assert all(a >= b for a, b in zip(mus, mus[1:]))


def test_paint_boxes_backends_agree():
    rng = np.random.default_rng(5)
    n = 500
    ii, jj = rng.integers(0, 64, (2, n))
    ra, rb = rng.integers(0, 6, (2, n))
    a = paint_boxes(ii, jj, ra, rb, 64, 64, backend="numba")
    b = paint_boxes(ii, jj, ra, rb, 64, 64, backend="numpy")
    ref = np.zeros((64, 64), dtype=bool)
    for i, j, x, y in zip(ii, jj, ra, rb):
        ref[max(i - x, 0):i + x + 1, max(j - y, 0):j + y + 1] = True
    assert np.array_equal(a, ref) and np.array_equal(b, ref)


def test_grid_index_and_mesh():
    g = PhaseGrid(2, 3, 9, 13)
    assert g.index(0, 0) == (4, 6)
    assert g.index(100, -100) == (8, 0)
    X, XI = g.mesh()
    assert X.shape == (9, 13) and XI[0, -1] == 3.0
    with pytest.raises(ValueError):
        PhaseGrid(1, 1, 4, 4)
