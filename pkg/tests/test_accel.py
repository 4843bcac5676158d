import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from anisogabor import _accel

# exercises every kernel through its default backend choice
SCRIPT = """
import sys
from fractions import Fraction
import numpy as np
from anisogabor._accel import use_numba
from anisogabor.geometry import AnisoParams, PhaseGrid, RegionMask, aniso_neighborhood
from anisogabor.hamilton import HamiltonianSpec, flow_points, transport_region
from anisogabor.singularity import ray_exponents
from anisogabor.stft import Window, delta_field
from anisogabor.symbols import CutoffSpec, mollified_cutoff

g = PhaseGrid(4, 4, 81, 81)
cone = RegionMask(lambda x, xi: 2 * np.abs(x) <= np.abs(xi), g)
nb = aniso_neighborhood(AnisoParams(), cone, 0.2).raster
h = HamiltonianSpec(1, 1, Fraction(6, 5))
rng = np.random.default_rng(3)
x, xi = rng.uniform(-2, 2, (2, 40))
fx, fxi = flow_points(h, x, xi, 0.7)
moved = transport_region(h, cone, 0.4).raster
_, ex = ray_exponents(delta_field(Window(), PhaseGrid()), AnisoParams(), n_rays=90)
gc = PhaseGrid(1.6, 1.6, 257, 257)
q = mollified_cutoff(CutoffSpec(0.1, 0.9, AnisoParams(1, 1, 0.5), RegionMask.lattice_point(gc, 0, 0), mu=0.2))
np.savez(sys.argv[1], numba=use_numba(), nb=nb, fx=fx, fxi=fxi, moved=moved, ex=ex, q=q.values)
"""


def _run(path, disable):
    env = dict(os.environ)
    env.pop("ANISOGABOR_NO_NUMBA", None)
    if disable:
        env["ANISOGABOR_NO_NUMBA"] = "1"
    subprocess.run([sys.executable, "-c", SCRIPT, str(path)], check=True, env=env)
    return np.load(path)


@pytest.mark.skipif(not _accel.use_numba(), reason="numba not available")
def test_numpy_fallback_matches_numba(tmp_path):
    a = _run(tmp_path / "a.npz", False)
    b = _run(tmp_path / "b.npz", True)
    assert bool(a["numba"]) and not bool(b["numba"])
    assert np.array_equal(a["nb"], b["nb"])
    assert np.max(np.hypot(a["fx"] - b["fx"], a["fxi"] - b["fxi"])) < 1e-8
    assert np.mean(a["moved"] != b["moved"]) < 1e-3
    assert np.allclose(a["ex"], b["ex"], atol=1e-9)
    assert np.allclose(a["q"], b["q"], atol=1e-12)


def test_flag_parsing(monkeypatch):
    import importlib

    for val, expect in (("1", False), ("true", False), ("0", True), ("", True)):
        monkeypatch.setenv("ANISOGABOR_NO_NUMBA", val)
        mod = importlib.reload(_accel)
        assert mod.use_numba() is (expect and _has_numba())
    monkeypatch.delenv("ANISOGABOR_NO_NUMBA")
    importlib.reload(_accel)


def _has_numba():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def test_jit_passthrough_when_disabled(monkeypatch):
    import importlib

    monkeypatch.setenv("ANISOGABOR_NO_NUMBA", "1")
    mod = importlib.reload(_accel)

    def f(a):
        return a + 1

    assert mod.jit(f) is f
    mod.set_threads(4)
    monkeypatch.delenv("ANISOGABOR_NO_NUMBA")
    importlib.reload(_accel)
