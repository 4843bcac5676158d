from fractions import Fraction

import numpy as np
import pytest

from anisogabor import io
from anisogabor.geometry import AnisoParams, PhaseGrid, PhasePoint, RegionMask
from anisogabor.hamilton import HamiltonianSpec, flow_rk4
from anisogabor.schrodinger import build_operator, propagate
from anisogabor.signal import SpatialGrid, chirp, hermite
from anisogabor.singularity import decay_map
from anisogabor.stft import Window, analyze, delta_field

G = PhaseGrid(4, 5, 17, 21)


@pytest.fixture
def region():
    return RegionMask(lambda x, xi: (np.abs(xi) >= 2 * np.abs(x)) | (x > 3), G, label="mix")


def test_region_dict_roundtrip(region):
    d = io.region_to_dict(region)
    back = io.region_from_dict(d)
    assert np.array_equal(back.raster, region.raster) and back.label == "mix"
    # predicate of the decoded region reads the raster back at lattice points
    X, XI = G.mesh()
    assert np.array_equal(back.predicate(X, XI), region.raster)
    full = RegionMask(lambda x, xi: np.ones_like(x, dtype=bool), G)
    assert io.region_to_dict(full)["runs"][0] == 0
    assert np.all(io.region_from_dict(io.region_to_dict(full)).raster)


def test_rle_size_mismatch(region):
    d = io.region_to_dict(region)
    d["runs"] = d["runs"][:-1]
    with pytest.raises(ValueError, match="run lengths"):
        io.region_from_dict(d)


def test_region_csv_roundtrip(tmp_path, region):
    p = io.write_region_csv(tmp_path / "r.csv", region)
    back = io.read_region_csv(p, G)
    assert np.array_equal(back.raster, region.raster)
    with pytest.raises(ValueError, match="row count"):
        io.read_region_csv(p, PhaseGrid(4, 5, 17, 17))


def test_signal_csv_roundtrip(tmp_path):
    u = chirp(0.8, SpatialGrid(10, 101))
    back = io.read_signal_csv(io.write_signal_csv(tmp_path / "u.csv", u))
    assert np.array_equal(back.values, u.values) and back.x_max == u.x_max


def test_field_roundtrips(tmp_path):
    sg = SpatialGrid(10, 201)
    F = analyze(hermite(2, sg), Window("hermite", 1, grid=sg), G)
    back = io.read_field_csv(io.write_field_csv(tmp_path / "f.csv", F), G)
    assert np.array_equal(back.values, F.values)
    bb = io.read_field_binary(io.write_field_binary(tmp_path / "f.bin", F))
    assert np.array_equal(bb.values, F.values)
    assert bb.window.kind == "hermite" and bb.window.order == 1 and bb.window.grid.n == 201
    assert bb.grid.to_dict() == G.to_dict()
    assert (tmp_path / "f.bin").stat().st_size == 17 * 21 * 16


def test_decay_csv_roundtrip(tmp_path):
    g = PhaseGrid()
    dm = decay_map(delta_field(Window(), g), AnisoParams())
    ex = io.read_decay_csv(io.write_decay_csv(tmp_path / "d.csv", dm), g)
    assert np.all(np.isnan(ex[dm.unresolved]))
    ok = ~dm.unresolved
    assert np.array_equal(ex[ok], dm.exponents[ok])


def test_trajectory_roundtrip(tmp_path):
    tr = flow_rk4(HamiltonianSpec(1, 1, Fraction(6, 5)), PhasePoint(1.0, 0.2), 0.5)
    back = io.read_trajectory_csv(io.write_trajectory_csv(tmp_path / "t.csv", tr))
    for a in ("times", "x", "xi", "energy"):
        assert np.array_equal(getattr(back, a), getattr(tr, a))


def test_basis_roundtrip(tmp_path):
    b = build_operator(2, 1, 48)
    back = io.load_basis(io.save_basis(tmp_path / "b.bin", b))
    assert np.array_equal(back.eigenvalues, b.eigenvalues)
    assert np.array_equal(back.eigenvectors, b.eigenvectors)
    assert np.array_equal(back.residuals, b.residuals)
    assert (back.k, back.m, back.scale, back.shift_C) == (b.k, b.m, b.scale, b.shift_C)
    head = io.read_json(tmp_path / "b.bin.json")
    assert head["M"] == 48 and head["n_certified"] == b.n_certified
    (tmp_path / "b.bin").write_bytes(b"\0" * 16)
    with pytest.raises(ValueError, match="size"):
        io.load_basis(tmp_path / "b.bin")


def test_evolution_roundtrip(tmp_path):
    b = build_operator(1, 1, 64)
    res = propagate(b, hermite(1), 1, [0.0, 0.5, 1.0])
    io.write_evolution_csv(tmp_path / "ev", res)
    t, x, snaps = io.read_evolution_csv(tmp_path / "ev")
    assert np.array_equal(t, res.times) and np.array_equal(snaps, res.snapshots)


def test_csv_is_deterministic(tmp_path, region):
    a = io.write_region_csv(tmp_path / "a.csv", region).read_bytes()
    b = io.write_region_csv(tmp_path / "b.csv", region).read_bytes()
    assert a == b
    io.write_json(tmp_path / "j1.json", {"b": 1, "a": [1.5]})
    io.write_json(tmp_path / "j2.json", {"a": [1.5], "b": 1})
    assert (tmp_path / "j1.json").read_bytes() == (tmp_path / "j2.json").read_bytes()


def test_read_errors(tmp_path):
    with pytest.raises(OSError, match="cannot read"):
        io.read_json(tmp_path / "missing.json")
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="expected header"):
        io.read_signal_csv(tmp_path / "bad.csv")
    with pytest.raises(OSError, match="cannot write"):
        io.write_json(tmp_path / "no" / "dir" / "x.json", {})
