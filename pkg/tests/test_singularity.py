import numpy as np
import pytest

from anisogabor.geometry import AnisoParams, PhaseGrid, RegionMask, aniso_neighborhood, theta_weight
from anisogabor.signal import SpatialGrid, gaussian
from anisogabor.singularity import (CAVEAT, angle_set_distance, curve_points, decay_map,
                                    filter_axioms_check, filter_membership, ladder_exponents,
                                    ray_exponents, ray_parameter, wavefront_extract)
from anisogabor.stft import Window, analyze, constant_field, delta_field

GRID = PhaseGrid()
P1 = AnisoParams()
TOL = 2 * np.radians(360 / 720)


@pytest.fixture(scope="module")
def gauss_field():
    u = gaussian(1.0)
    return analyze(u, Window(grid=u.grid), GRID)


def _cone(C, sigma=1.0, grid=GRID):
    return RegionMask(lambda x, xi: C * np.abs(x) ** sigma <= np.abs(xi), grid, label=f"freq{C}")


def _pos_cone(C, sigma=1.0, grid=GRID):
    return RegionMask(lambda x, xi: C * np.abs(xi) ** (1 / sigma) <= np.abs(x), grid, label=f"pos{C}")


@pytest.mark.parametrize("km", [(1, 1), (2, 1), (1, 2)])
def test_curve_points_on_unit_curve(km):
    p = AnisoParams(*km)
    t, x, xi = curve_points(p, 360)
    assert np.allclose(x ** (2 * p.k) + xi ** (2 * p.m), 1.0, atol=1e-12)
    assert np.allclose(ray_parameter(p, 3 * x, 3 ** p.sigma_f * xi), t, atol=1e-9)


def test_delta_frequency_axis_singular():
    F = delta_field(Window(), GRID)
    t, e = ray_exponents(F, P1)
    for ang in (np.pi / 2, 3 * np.pi / 2):
        i = int(np.argmin(np.abs(t - ang)))
        assert e[i] < 0.5
    # rays inside <eta> <= C <y> have maximal decay
    inside = np.abs(np.tan(t)) <= 2.0
    assert np.all(e[inside] >= 12.0)


def test_gaussian_decays_on_all_rays(gauss_field):
    _, e = ray_exponents(gauss_field, P1)
    assert np.all(e >= 12.0)
    assert wavefront_extract(gauss_field, P1).size == 0


def test_wavefront_delta_and_constant():
    w = Window()
    wf = wavefront_extract(delta_field(w, GRID), P1)
    assert angle_set_distance(wf, [np.pi / 2, 3 * np.pi / 2]) <= TOL
    wf = wavefront_extract(constant_field(w, GRID), P1)
    assert angle_set_distance(wf, [0.0, np.pi]) <= TOL


def test_decay_map_rasterizes_rays():
    dm = decay_map(delta_field(Window(), GRID), P1)
    i0, j0 = GRID.index(0.0, 15.0)
    i1, j1 = GRID.index(15.0, 0.0)
    assert dm.exponents[i0, j0] < 0.5
    assert dm.exponents[i1, j1] >= 12.0
    assert dm.unresolved[GRID.index(0.5, 0.5)]
    assert dm.shells and all(np.isfinite(s["max_abs"]) for s in dm.shells)


def test_insufficient_range():
    from anisogabor.stft import STFTField

    g = PhaseGrid(4, 4, 33, 33)
    u = gaussian(1.0)
    F = analyze(u, Window(grid=u.grid), g)
    with pytest.raises(ValueError, match="insufficient radial range"):
        ray_exponents(F, P1)


def test_membership_gaussian_whole_plane(gauss_field):
    rep = filter_membership(gauss_field, P1, RegionMask(lambda x, xi: np.hypot(x, xi) >= 1, GRID), 0.1)
    assert rep.member and rep.caveat == CAVEAT
    assert rep.to_dict()["shell_table"]


@pytest.mark.parametrize("km,grid", [((1, 1), GRID), ((2, 1), PhaseGrid(20, 400, 257, 257))])
def test_membership_delta_and_constant(km, grid):
    # frequency extent scaled like x^sigma so that both axes cover the same theta range
    p = AnisoParams(*km)
    s = p.sigma_f
    freq, pos = _cone(5.0, s, grid), _pos_cone(2.0, s, grid)
    F = delta_field(Window(), grid)
    off = filter_membership(F, p, freq, 0.1)
    on = filter_membership(F, p, pos, 0.1)
    assert not off.member and off.estimated_exponent < 2
    assert on.member and on.estimated_exponent > 8
    F = constant_field(Window(), grid)
    assert filter_membership(F, p, freq, 0.1).estimated_exponent > 8
    assert filter_membership(F, p, pos, 0.1).estimated_exponent < 2


def test_membership_errors(gauss_field):
    with pytest.raises(ValueError):
        filter_membership(gauss_field, P1, _cone(1.0), 0.0)
    with pytest.raises(ValueError):
        filter_membership(gauss_field, P1, RegionMask.lattice_point(GRID, 0, 0), 0.01)


def test_ladder_backends_agree():
    rng = np.random.default_rng(0)
    logt = np.log(2.0 * 2 ** (np.arange(20) / 4))[None, :]
    slope = rng.uniform(0, 14, (50, 1))
    logv = -slope * logt + rng.normal(scale=0.05, size=(50, 20))
    valid = rng.uniform(size=(50, 20)) > 0.1
    a = ladder_exponents(logv, logt, valid, -700.0, 12.0, backend="numba")
    b = ladder_exponents(logv, logt, valid, -700.0, 12.0, backend="numpy")
    assert np.allclose(a, b, atol=1e-12)
    assert np.all(a <= 12.0)


def _shell_exponent(F, p, raster):
    # direct oracle: maxima over theta octaves, slope over the upper half
    X, XI = F.grid.mesh()
    th = theta_weight(p, X, XI)
    top = min(1 + F.grid.x_max, 1 + F.grid.xi_max ** p.inv_sigma)
    lv = 2.0 * 2.0 ** (np.arange(0, 40) / 4)
    lv = lv[lv <= top]
    mx, lt = [], []
    for a, b in zip(lv[:-1], lv[1:]):
        sel = raster & (th >= a) & (th < b)
        if sel.any():
            mx.append(np.abs(F.values[sel]).max())
            lt.append(np.log(a))
    half = len(mx) // 2
    y = np.log(np.maximum(mx[half:], 1e-300))
    return -np.polyfit(lt[half:], y, 1)[0]


def test_axioms_delta_matches_direct_oracle():
    F = delta_field(Window(), GRID)
    a, b = _pos_cone(1.0), _pos_cone(3.0)
    inter = RegionMask(lambda x, xi: a.predicate(x, xi) & b.predicate(x, xi), GRID)
    for r in (a, b, inter):
        rep = filter_membership(F, P1, r, 0.1)
        assert rep.member
        nb = aniso_neighborhood(P1, r, 0.1)
        assert _shell_exponent(F, P1, nb.raster) > 8
    assert filter_axioms_check(F, P1, [a, b, inter], 0.1)


def test_axioms_whole_plane_and_empty(gauss_field):
    whole = RegionMask(lambda x, xi: np.ones_like(x, dtype=bool), GRID)
    empty = RegionMask(lambda x, xi: np.zeros_like(x, dtype=bool), GRID)
    assert filter_axioms_check(gauss_field, P1, [whole, empty, _cone(2.0)], 0.1)
    F = delta_field(Window(), GRID)
    assert filter_axioms_check(F, P1, [empty, _pos_cone(2.0)], 0.1)
    with pytest.raises(ValueError):
        filter_axioms_check(F, P1, [empty], 0.1)


def test_monotone_in_region_and_eps():
    F = delta_field(Window(), GRID)
    small, big = _pos_cone(3.0), _pos_cone(1.0)
    e_small = filter_membership(F, P1, small, 0.1).estimated_exponent
    e_big = filter_membership(F, P1, big, 0.1).estimated_exponent
    assert e_big <= e_small + 1e-9
    e_wide = filter_membership(F, P1, big, 0.3).estimated_exponent
    assert e_wide <= e_big + 1e-9


@pytest.mark.parametrize("km", [(1, 1), (2, 1)])
def test_metaplectic_transport_of_verdicts(km):
    # delta with sigma on Omega  <->  constant (its Fourier image) with 1/sigma on J Omega,
    # J(x, xi) = (xi, -x); the rotated grid swaps the two extents
    p = AnisoParams(*km)
    s = p.sigma_f
    g = PhaseGrid(20, 20 ** s, 257, 257)
    gj = PhaseGrid(20 ** s, 20, 257, 257)
    w = Window()
    Fd = delta_field(w, g)
    Fc = constant_field(w.fourier(), gj)
    verdicts = []
    for C in (2.0, 5.0):
        for kind in ("freq", "pos"):
            if kind == "freq":
                om = _cone(C, s, g)
                j_om = RegionMask(lambda x, xi, C=C: C * np.abs(xi) ** s <= np.abs(x), gj)
            else:
                om = _pos_cone(C, s, g)
                j_om = RegionMask(lambda x, xi, C=C: C * np.abs(x) ** (1 / s) <= np.abs(xi), gj)
            a = filter_membership(Fd, p, om, 0.1).member
            b = filter_membership(Fc, p.dual(), j_om, 0.1).member
            assert a == b
            verdicts.append(a)
    assert True in verdicts and False in verdicts
