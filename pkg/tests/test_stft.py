from math import pi, sqrt

import numpy as np
import pytest

from anisogabor.geometry import AnisoParams, PhaseGrid
from anisogabor.signal import SampledSignal, SpatialGrid, chirp, gaussian, hermite, l2_norm
from anisogabor.singularity import ray_exponents
from anisogabor.stft import (STFTField, Window, analyze, constant_field, delta_field, fourier,
                             metaplectic_check, moyal_error, synthesize)
from oracles import dense_dft, dense_stft, gaussian_stft_abs

GRID = PhaseGrid(8, 8, 65, 65)


def test_gaussian_stft_closed_form():
    u = gaussian(1.0)
    F = analyze(u, Window(grid=u.grid), GRID)
    X, XI = GRID.mesh()
    assert np.max(np.abs(F.abs - gaussian_stft_abs(X, XI))) < 1e-12


def test_analyze_matches_direct_sum():
    u = chirp(0.7)
    w = Window("hermite", 2, grid=u.grid)
    F = analyze(u, w, GRID)
    for i, j in [(0, 0), (20, 41), (32, 32), (64, 10)]:
        ref = dense_stft(u.values, u.xs, w, GRID.xs[i], GRID.xis[j])
        assert abs(F.values[i, j] - ref) < 1e-12


def test_zero_in_zero_out():
    g = SpatialGrid()
    z = SampledSignal(np.zeros(g.n), g.x_max)
    w = Window(grid=g)
    F = analyze(z, w, GRID)
    assert not F.values.any()
    assert not synthesize(F, w).values.any()


def test_delta_field_is_xi_independent():
    w = Window(grid=SpatialGrid())
    F = delta_field(w, GRID)
    X, _ = GRID.mesh()
    assert np.max(np.abs(F.abs - np.abs(w(-X)) / sqrt(2 * pi))) < 1e-15
    assert np.allclose(F.abs, F.abs[:, :1])


def test_constant_field_is_x_independent():
    w = Window("hermite", 1, grid=SpatialGrid())
    F = constant_field(w, GRID)
    assert np.allclose(F.abs, F.abs[:1, :])


def test_cauchy_schwarz_bound():
    u = hermite(3)
    w = Window(grid=u.grid)
    F = analyze(u, w, GRID)
    assert F.abs.max() <= l2_norm(u) * w.l2_norm / sqrt(2 * pi) + 1e-12


@pytest.mark.parametrize("sig", [gaussian(1.0), hermite(3), chirp(1.0)])
def test_moyal_inversion(sig):
    assert moyal_error(sig, Window(grid=sig.grid)) < 1e-6


def test_synthesize_indicator_matches_catalog():
    from anisogabor.geometry import RegionMask
    from anisogabor.signal import indicator_synth

    sg = SpatialGrid(10, 201)
    w = Window(grid=sg)
    box = RegionMask(lambda x, xi: (np.abs(x) <= 1) & (np.abs(xi) <= 2), PhaseGrid(5, 5, 41, 41))
    a = indicator_synth(box, w, sg)
    b = synthesize(STFTField(box.raster.astype(complex), box.grid, w, "", sg), w, sg)
    assert np.array_equal(a.values, b.values)


def test_fourier_fixed_point_and_parseval():
    u = gaussian(1.0)
    fu = fourier(u)
    assert np.max(np.abs(fu.values - u.values)) < 1e-8
    v = chirp(1.5)
    assert l2_norm(fourier(v)) == pytest.approx(l2_norm(v), abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_fourier_of_hermite(n):
    u = hermite(n, SpatialGrid(15, 601))
    fu = fourier(u)
    assert np.max(np.abs(fu.values - (-1j) ** n * u.values)) < 1e-7
    assert np.max(np.abs(fu.values - dense_dft(u.values, u.xs))) < 1e-10


def test_window_fourier_phase():
    w = Window("hermite", 3)
    assert w.fourier().phase == pytest.approx(1j)
    assert w.fourier().fourier().phase == pytest.approx(-1)


def test_metaplectic_examples():
    u = gaussian(1.0)
    w = Window(grid=u.grid)
    assert metaplectic_check(u, w, ("dilation", 1.0), GRID) == 0.0
    assert metaplectic_check(u, w, "fourier", GRID) < 1e-8
    c = chirp(1.0)
    assert metaplectic_check(c, w, ("dilation", 2.0), GRID) < 1e-6
    assert metaplectic_check(c, w, ("dilation", -0.5), GRID) < 1e-6
    with pytest.raises(ValueError):
        metaplectic_check(u, w, "fourier", PhaseGrid(8, 4, 65, 65))


def test_window_validation():
    with pytest.raises(ValueError):
        Window("boxcar")
    with pytest.raises(ValueError):
        Window(scale=0.0)
    u = gaussian(1.0)
    with pytest.raises(ValueError):
        analyze(u, Window(grid=SpatialGrid(10, 101)), GRID)


@pytest.mark.parametrize("make", [lambda g: gaussian(1.0, g), lambda g: hermite(3, g)])
def test_window_independence_of_exponents(make):
    # exponents are capped at 12; both windows must agree within 0.5
    sg = SpatialGrid(30, 1201)
    u = make(sg)
    grid = PhaseGrid(20, 20, 257, 257)
    e = [ray_exponents(analyze(u, w, grid), AnisoParams(), n_rays=180)[1]
         for w in (Window(grid=sg), Window("hermite", 2, grid=sg))]
    assert np.max(np.abs(e[0] - e[1])) <= 0.5


def test_window_independence_exact_fields():
    g = PhaseGrid()
    a = [ray_exponents(delta_field(w, g), AnisoParams(), n_rays=180)[1]
         for w in (Window(), Window("hermite", 2))]
    b = [ray_exponents(constant_field(w, g), AnisoParams(), n_rays=180)[1]
         for w in (Window(), Window("hermite", 2))]
    assert np.max(np.abs(a[0] - a[1])) <= 0.5
    assert np.max(np.abs(b[0] - b[1])) <= 0.5
