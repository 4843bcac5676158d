"""Readers and writers for the artifacts produced by the library.

Text outputs are CSV with a header row and ``%.17g`` numbers, so identical
inputs give byte-identical files.  Bulk arrays go to little-endian float64
binaries with a JSON sidecar.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .geometry import PhaseGrid, RegionMask
from .signal import SampledSignal, SpatialGrid
from .stft import STFTField, Window

FMT = "%.17g"


def _num(v):
    return FMT % v


def _write_rows(path, header, columns):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            cols = [np.asarray(c).ravel() for c in columns]
            for row in zip(*cols):
                fh.write(",".join(v if isinstance(v, str) else _num(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _read_rows(path, header):
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows or rows[0] != list(header):
        raise ValueError(f"{path}: expected header {','.join(header)}")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(header))
    return [data[:, i] for i in range(len(header))]


def write_json(path, obj):
    path = Path(path)
    try:
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc


# -- grids and windows ------------------------------------------------------


def grid_from_dict(d) -> PhaseGrid:
    return PhaseGrid(float(d["x_max"]), float(d["xi_max"]), int(d["nx"]), int(d["nxi"]))


def window_to_dict(w: Window):
    return {"kind": w.kind, "order": w.order, "scale": w.scale,
            "phase": [float(np.real(w.phase)), float(np.imag(w.phase))], "grid": w.grid.to_dict()}


def window_from_dict(d) -> Window:
    ph = d.get("phase", [1.0, 0.0])
    g = d.get("grid", {})
    return Window(d.get("kind", "gaussian"), int(d.get("order", 0)), float(d.get("scale", 1.0)),
                  complex(ph[0], ph[1]), SpatialGrid(float(g.get("x_max", 30.0)), int(g.get("n", 1201))))


# -- regions ----------------------------------------------------------------


def _rle(bits):
    flat = np.asarray(bits, dtype=bool).ravel()
    change = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    edges = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(edges).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return runs


def _unrle(runs, size):
    out = np.zeros(size, dtype=bool)
    pos, val = 0, False
    for r in runs:
        out[pos:pos + r] = val
        pos += r
        val = not val
    if pos != size:
        raise ValueError("run lengths do not match the grid size")
    return out


def region_to_dict(region: RegionMask):
    """Raster as run lengths (C order, first run counts ``False`` cells)."""
    return {"label": region.label, "grid": region.grid.to_dict(), "runs": _rle(region.raster)}


def _raster_region(raster, grid: PhaseGrid, label):
    def pred(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        i = np.rint((x + grid.x_max) / grid.hx).astype(int)
        j = np.rint((xi + grid.xi_max) / grid.hxi).astype(int)
        ok = (i >= 0) & (i < grid.nx) & (j >= 0) & (j < grid.nxi)
        out = np.zeros(x.shape, dtype=bool)
        out[ok] = raster[i[ok], j[ok]]
        return out

    return RegionMask(pred, grid, raster.copy(), label=label)


def region_from_dict(d) -> RegionMask:
    grid = grid_from_dict(d["grid"])
    raster = _unrle(d["runs"], grid.nx * grid.nxi).reshape(grid.nx, grid.nxi)
    return _raster_region(raster, grid, d.get("label", ""))


def write_region_csv(path, region: RegionMask):
    X, XI = region.grid.mesh()
    return _write_rows(path, ["x", "xi", "inside"], [X, XI, region.raster.astype(int)])


def read_region_csv(path, grid: PhaseGrid, label=""):
    x, xi, inside = _read_rows(path, ["x", "xi", "inside"])
    if x.size != grid.nx * grid.nxi:
        raise ValueError(f"{path}: row count does not match the grid")
    return _raster_region(inside.reshape(grid.nx, grid.nxi) > 0.5, grid, label)


# -- signals and fields -----------------------------------------------------


def write_signal_csv(path, u: SampledSignal):
    return _write_rows(path, ["x", "re", "im"], [u.xs, u.values.real, u.values.imag])


def read_signal_csv(path, label=""):
    x, re, im = _read_rows(path, ["x", "re", "im"])
    return SampledSignal(re + 1j * im, float(x[-1]), label)


def write_field_csv(path, F: STFTField):
    X, XI = F.grid.mesh()
    v = F.values
    return _write_rows(path, ["x", "xi", "re", "im", "abs"], [X, XI, v.real, v.imag, np.abs(v)])


def read_field_csv(path, grid: PhaseGrid, window: Window = None, label=""):
    x, xi, re, im, _ = _read_rows(path, ["x", "xi", "re", "im", "abs"])
    vals = (re + 1j * im).reshape(grid.nx, grid.nxi)
    return STFTField(vals, grid, window or Window(), label)


def write_field_binary(path, F: STFTField):
    """``path`` gets interleaved little-endian float64 (re, im); ``path.json`` the header."""
    path = Path(path)
    data = np.empty(F.values.shape + (2,), dtype="<f8")
    data[..., 0] = F.values.real
    data[..., 1] = F.values.imag
    try:
        data.tofile(path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    write_json(str(path) + ".json", {"grid": F.grid.to_dict(), "window": window_to_dict(F.window),
                                     "source": F.source_label, "dtype": "<f8", "layout": "nx,nxi,re|im"})
    return path


def read_field_binary(path) -> STFTField:
    path = Path(path)
    head = read_json(str(path) + ".json")
    grid = grid_from_dict(head["grid"])
    data = np.fromfile(path, dtype="<f8").reshape(grid.nx, grid.nxi, 2)
    return STFTField(data[..., 0] + 1j * data[..., 1], grid, window_from_dict(head["window"]), head["source"])


# -- singularity outputs ----------------------------------------------------


def write_decay_csv(path, dm):
    X, XI = dm.grid.mesh()
    ex = np.where(dm.unresolved, np.nan, dm.exponents)
    return _write_rows(path, ["x", "xi", "exponent"], [X, XI, ex])


def read_decay_csv(path, grid: PhaseGrid):
    _, _, ex = _read_rows(path, ["x", "xi", "exponent"])
    return ex.reshape(grid.nx, grid.nxi)


def write_filter_report(path, report):
    return write_json(path, report.to_dict() if hasattr(report, "to_dict") else report)


# -- flows ------------------------------------------------------------------


def write_trajectory_csv(path, tr):
    return _write_rows(path, ["t", "x", "xi", "energy"], [tr.times, tr.x, tr.xi, tr.energy])


def read_trajectory_csv(path):
    from .hamilton import Trajectory

    t, x, xi, e = _read_rows(path, ["t", "x", "xi", "energy"])
    return Trajectory(t, x, xi, e)


# -- spectral solver --------------------------------------------------------


def save_basis(path, basis):
    """``path`` holds eigenvalues, residuals and eigenvectors (column-major
    blocks of little-endian float64); ``path.json`` the header."""
    path = Path(path)
    M = basis.basis_size
    blob = np.concatenate([basis.eigenvalues, basis.residuals, basis.eigenvectors.ravel(order="F")])
    try:
        blob.astype("<f8").tofile(path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    write_json(str(path) + ".json", {
        "k": basis.k, "m": basis.m, "M": M, "scale": basis.scale, "shift_C": basis.shift_C,
        "n_certified": basis.n_certified, "dtype": "<f8",
        "layout": "eigenvalues[M], residuals[M], eigenvectors[M*M] column-major",
        "max_certified_residual": float(np.max(basis.residuals[:basis.n_certified], initial=0.0)),
    })
    return path


def load_basis(path):
    from .schrodinger import SpectralBasis

    path = Path(path)
    head = read_json(str(path) + ".json")
    M = int(head["M"])
    blob = np.fromfile(path, dtype="<f8")
    if blob.size != 2 * M + M * M:
        raise ValueError(f"{path}: size does not match header")
    lam, res = blob[:M].copy(), blob[M:2 * M].copy()
    V = blob[2 * M:].reshape((M, M), order="F").copy()
    return SpectralBasis(M, lam, V, float(head["shift_C"]), int(head["k"]), int(head["m"]),
                         float(head["scale"]), res)


def write_evolution_csv(directory, res):
    """One ``snapshot_XXX.csv`` (x, re, im) per time plus ``times.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    xs = res.grid.xs
    paths = [_write_rows(d / "times.csv", ["index", "t"], [np.arange(res.times.size).astype(float), res.times])]
    for i in range(res.times.size):
        v = res.snapshots[i]
        paths.append(_write_rows(d / f"snapshot_{i:03d}.csv", ["x", "re", "im"], [xs, v.real, v.imag]))
    return paths


def read_evolution_csv(directory):
    d = Path(directory)
    _, times = _read_rows(d / "times.csv", ["index", "t"])
    snaps = []
    x = None
    for i in range(times.size):
        x, re, im = _read_rows(d / f"snapshot_{i:03d}.csv", ["x", "re", "im"])
        snaps.append(re + 1j * im)
    return times, x, np.array(snaps)
