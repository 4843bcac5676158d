"""Decay exponents of STFT fields and the numerical filter of singularities.

A direction in the phase plane is a sigma-conic ray ``lam -> (lam x0, lam^sigma xi0)``
through a point of the curve ``x^{2k} + xi^{2m} = 1``.  Along each ray (or over
a region) the maxima of ``|V u|`` are collected on a geometric ladder of
``theta_sigma`` levels, and the decay exponent is minus the least-squares
slope of ``log max|V|`` against ``log theta`` over the upper half of the ladder.

Super-polynomial decay cannot be decided from finitely many scales, so a
region counts as smooth when the exponent reaches ``n_threshold``.  Reports
carry the caveat ``"finite-scale surrogate"``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._accel import jit, use_numba
from .geometry import AnisoParams, PhaseGrid, RegionMask, aniso_neighborhood, theta_weight
from .stft import STFTField

CAVEAT = "finite-scale surrogate"
EXACT_THETA_MAX = 4096.0


@dataclass(frozen=True, eq=False)
class DecayMap:
    exponents: np.ndarray
    grid: PhaseGrid
    params: AnisoParams
    ray_angles: np.ndarray
    ray_exponents: np.ndarray
    unresolved: np.ndarray
    shells: List[dict] = field(default_factory=list)
    n_cap: float = 12.0
    r_min: float = 2.0


@dataclass(frozen=True, eq=False)
class FilterReport:
    region: RegionMask
    eps: float
    member: bool
    estimated_exponent: float
    n_threshold: float
    shell_table: List[tuple]
    caveat: str = CAVEAT

    def to_dict(self):
        return {
            "region": self.region.label,
            "eps": self.eps,
            "member": self.member,
            "estimated_exponent": self.estimated_exponent,
            "n_threshold": self.n_threshold,
            "caveat": self.caveat,
            "shell_table": [
                {"level": int(j), "max_abs": float(v), "theta": float(r)} for j, v, r in self.shell_table
            ],
        }


def curve_points(p: AnisoParams, n_rays: int = 720):
    """Points of ``x^{2k} + xi^{2m} = 1`` in the Euclidean directions ``2 pi i / n``."""
    t = 2.0 * np.pi * np.arange(n_rays) / n_rays
    c, s = np.cos(t), np.sin(t)
    lo = np.zeros_like(t)
    hi = 1.0 / np.maximum(np.abs(c), np.abs(s))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        f = (mid * c) ** (2 * p.k) + (mid * s) ** (2 * p.m)
        big = f > 1.0
        hi = np.where(big, mid, hi)
        lo = np.where(big, lo, mid)
    r = 0.5 * (lo + hi)
    return t, r * c, r * s


def ray_parameter(p: AnisoParams, x, xi):
    """Angle of the curve point on the sigma-conic ray through ``(x, xi)``."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    lam = (x ** (2 * p.k) + xi ** (2 * p.m)) ** (1.0 / (2 * p.k))
    lam = np.where(lam > 0, lam, 1.0)
    x0 = x / lam
    xi0 = xi / lam ** p.sigma_f
    return np.mod(np.arctan2(xi0, x0), 2.0 * np.pi)


def _theta_cover(p: AnisoParams, grid: PhaseGrid):
    """Largest theta level whose whole sublevel set lies inside the grid."""
    return min(1.0 + grid.x_max, 1.0 + grid.xi_max ** p.inv_sigma)


def _theta_levels(r_min, theta_max, per_octave):
    n = int(np.floor(per_octave * np.log2(theta_max / r_min) + 1e-9))
    return r_min * 2.0 ** (np.arange(n + 1) / per_octave)


# ---------------------------------------------------------------------------
# slope regression over the upper half of each ladder


@jit
def _slopes_loop(logv, logt, valid, log_floor, n_cap):
    n_rows, n_lev = logv.shape
    out = np.empty(n_rows)
    for r in range(n_rows):
        n_valid = 0
        for j in range(n_lev):
            if valid[r, j]:
                n_valid += 1
        if n_valid < 2:
            out[r] = n_cap
            continue
        start = n_valid // 2
        seen = 0
        sx = 0.0
        sy = 0.0
        sxx = 0.0
        sxy = 0.0
        cnt = 0
        for j in range(n_lev):
            if not valid[r, j]:
                continue
            seen += 1
            if seen <= start or logv[r, j] <= log_floor:
                continue
            sx += logt[r, j]
            sy += logv[r, j]
            sxx += logt[r, j] * logt[r, j]
            sxy += logt[r, j] * logv[r, j]
            cnt += 1
        if cnt < 2:
            out[r] = n_cap
            continue
        den = cnt * sxx - sx * sx
        if den <= 0.0:
            out[r] = n_cap
            continue
        e = -(cnt * sxy - sx * sy) / den
        out[r] = min(max(e, 0.0), n_cap)
    return out


def _slopes_numpy(logv, logt, valid, log_floor, n_cap):
    n_valid = valid.sum(axis=1)
    rank = np.cumsum(valid, axis=1)
    use = valid & (rank > (n_valid // 2)[:, None]) & (logv > log_floor)
    w = use.astype(float)
    cnt = w.sum(axis=1)
    x = np.where(use, logt, 0.0)
    y = np.where(use, logv, 0.0)
    sx, sy = x.sum(axis=1), y.sum(axis=1)
    sxx, sxy = (x * x).sum(axis=1), (x * y).sum(axis=1)
    den = cnt * sxx - sx * sx
    ok = (n_valid >= 2) & (cnt >= 2) & (den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = -(cnt * sxy - sx * sy) / den
    e = np.clip(np.where(ok, e, n_cap), 0.0, n_cap)
    return e


def ladder_exponents(logv, logt, valid, log_floor, n_cap, backend=None):
    """Decay exponents for each row of a (rows x levels) table of log maxima."""
    logv = np.ascontiguousarray(logv, dtype=float)
    logt = np.ascontiguousarray(np.broadcast_to(logt, logv.shape), dtype=float)
    valid = np.ascontiguousarray(valid, dtype=np.bool_)
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        return _slopes_loop(logv, logt, valid, float(log_floor), float(n_cap))
    return _slopes_numpy(logv, logt, valid, float(log_floor), float(n_cap))


def _bilinear(field_abs, grid: PhaseGrid, x, xi):
    fx = (x + grid.x_max) / grid.hx
    fy = (xi + grid.xi_max) / grid.hxi
    i0 = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, grid.nxi - 2)
    tx = np.clip(fx - i0, 0.0, 1.0)
    ty = np.clip(fy - j0, 0.0, 1.0)
    a = field_abs[i0, j0]
    b = field_abs[i0 + 1, j0]
    c = field_abs[i0, j0 + 1]
    d = field_abs[i0 + 1, j0 + 1]
    return (1 - tx) * (1 - ty) * a + tx * (1 - ty) * b + (1 - tx) * ty * c + tx * ty * d


def _floor(F: STFTField, floor_rel):
    if floor_rel is None:
        floor_rel = 1e-300 if F.exact is not None else 1e-10
    peak = float(np.max(np.abs(F.values))) or 1.0
    return np.log(max(peak * floor_rel, 1e-300))


def ray_exponents(F: STFTField, p: AnisoParams, n_rays=720, n_cap=12.0, r_min=2.0,
                  per_octave=4, sub=4, theta_max=None, floor_rel=None):
    """Per-ray decay exponents; returns ``(angles, exponents)``."""
    grid = F.grid
    use_exact = F.exact is not None
    if theta_max is None:
        theta_max = EXACT_THETA_MAX if use_exact else None
    t, x0, xi0 = curve_points(p, n_rays)
    speed = np.abs(x0) + np.abs(xi0) ** p.inv_sigma
    with np.errstate(divide="ignore"):
        lam_grid = np.minimum(np.where(x0 != 0, grid.x_max / np.abs(x0), np.inf),
                              np.where(xi0 != 0, (grid.xi_max / np.abs(xi0)) ** p.inv_sigma, np.inf))
    theta_exit = 1.0 + lam_grid * speed
    if theta_max is None:
        top = theta_exit
    else:
        top = np.full(n_rays, float(theta_max)) if use_exact else np.minimum(theta_exit, theta_max)
    if np.log2(np.max(top) / r_min) < 3.0:
        raise ValueError("insufficient radial range")
    levels = _theta_levels(r_min, float(np.max(top)), per_octave)
    # sub-samples within each level; max over them gives the level maximum
    frac = np.arange(sub) / sub
    th = levels[:-1, None] * (levels[1:, None] / levels[:-1, None]) ** frac[None, :]
    th = th.ravel()
    lam = (th[None, :] - 1.0) / speed[:, None]
    X = lam * x0[:, None]
    XI = lam ** p.sigma_f * xi0[:, None]
    if use_exact:
        vals = np.abs(F.exact(X, XI))
    else:
        vals = _bilinear(np.abs(F.values), grid, X, XI)
    vals = vals.reshape(n_rays, len(levels) - 1, sub).max(axis=2)
    valid = levels[None, 1:] <= top[:, None] * (1 + 1e-12)
    with np.errstate(divide="ignore"):
        logv = np.log(np.maximum(vals, 1e-300))
    logt = np.log(levels[:-1])
    e = ladder_exponents(logv, logt[None, :], valid, _floor(F, floor_rel), n_cap)
    return t, e


def decay_map(F: STFTField, p: AnisoParams, n_rays=720, n_cap=12.0, r_min=2.0, **kw) -> DecayMap:
    """Per-ray exponents rasterized to the grid by nearest ray."""
    t, e = ray_exponents(F, p, n_rays, n_cap, r_min, **kw)
    grid = F.grid
    X, XI = grid.mesh()
    par = ray_parameter(p, X, XI)
    idx = np.rint(par / (2.0 * np.pi / n_rays)).astype(int) % n_rays
    ex = e[idx]
    unresolved = np.hypot(X, XI) < r_min
    th = theta_weight(p, X, XI)
    absv = np.abs(F.values)
    shells = []
    j = 0
    while 2.0 ** j <= th.max():
        sel = (th >= 2.0 ** j) & (th < 2.0 ** (j + 1))
        if sel.any():
            shells.append({"j": j, "max_abs": float(absv[sel].max()), "theta_lo": 2.0 ** j})
        j += 1
    return DecayMap(ex, grid, p, t, e, unresolved, shells, n_cap, r_min)


def region_ladder(F: STFTField, p: AnisoParams, raster, r_min=2.0, per_octave=4):
    """Level maxima of ``|V|`` over a raster: ``(levels, maxima, nonempty)``."""
    grid = F.grid
    X, XI = grid.mesh()
    th = theta_weight(p, X, XI)
    levels = _theta_levels(r_min, _theta_cover(p, grid), per_octave)
    if len(levels) < 2:
        raise ValueError("insufficient radial range")
    absv = np.abs(F.values)
    lev = np.searchsorted(levels, th, side="right") - 1
    inside = raster & (lev >= 0) & (lev < len(levels) - 1)
    maxima = np.zeros(len(levels) - 1)
    np.maximum.at(maxima, lev[inside], absv[inside])
    nonempty = np.zeros(len(levels) - 1, dtype=bool)
    nonempty[np.unique(lev[inside])] = True
    return levels, maxima, nonempty


def filter_membership(F: STFTField, p: AnisoParams, omega: RegionMask, eps: float,
                      n_threshold: float = 8.0, n_cap: float = 12.0, r_min: float = 2.0,
                      per_octave: int = 4, floor_rel: Optional[float] = None) -> FilterReport:
    """Decide numerically whether ``u`` is smooth in ``omega``.

    ``member`` is true when the decay exponent of ``|V u|`` over the
    neighborhood ``omega_{rho, eps}`` reaches ``n_threshold``, i.e. when the
    complement of ``omega`` is judged to belong to the filter of ``u``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if omega.grid != F.grid:
        raise ValueError("region and field live on different grids")
    nb = aniso_neighborhood(p, omega, eps)
    levels, maxima, nonempty = region_ladder(F, p, nb.raster, r_min, per_octave)
    if not nonempty.any():
        raise ValueError("region neighborhood is empty beyond r_min")
    with np.errstate(divide="ignore"):
        logv = np.log(np.maximum(maxima, 1e-300))
    e = ladder_exponents(logv[None, :], np.log(levels[:-1])[None, :], nonempty[None, :],
                         _floor(F, floor_rel), n_cap)[0]
    table = [(j, maxima[j], levels[j]) for j in range(len(maxima)) if nonempty[j]]
    return FilterReport(omega, eps, bool(e >= n_threshold), float(e), n_threshold, table)


def wavefront_extract(F: STFTField, p: AnisoParams, n_threshold: float = 8.0, **kw):
    """Ray angles whose decay exponent stays below ``n_threshold``."""
    t, e = ray_exponents(F, p, **kw)
    return t[e < n_threshold]


def angular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi)
    return d


def angle_set_distance(a, b):
    """Symmetric Hausdorff distance between two sets of angles (radians)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 and b.size == 0:
        return 0.0
    if a.size == 0 or b.size == 0:
        return np.inf
    d = angular_distance(a[:, None], b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def filter_axioms_check(F: STFTField, p: AnisoParams, regions, eps: float,
                        n_threshold: float = 8.0, **kw) -> bool:
    """Check the filter axioms on a finite family of regions.

    In terms of the regions where ``u`` is smooth: smoothness in the empty set
    always holds, smoothness passes to subsets, and smoothness in two regions
    gives smoothness in their union.
    """
    if len(regions) < 2:
        raise ValueError("need at least two regions")

    def smooth(r):
        if r.is_empty():
            return True
        return filter_membership(F, p, r, eps, n_threshold, **kw).member

    verdict = [smooth(r) for r in regions]
    ok = True
    for a, ra in enumerate(regions):
        for b, rb in enumerate(regions):
            if a == b:
                continue
            subset = not (rb.raster & ~ra.raster).any()
            if verdict[a] and subset and not verdict[b]:
                ok = False
            if a < b and verdict[a] and verdict[b]:
                pa, pb = ra.predicate, rb.predicate
                union = RegionMask(lambda x, xi, pa=pa, pb=pb: pa(x, xi) | pb(x, xi), ra.grid,
                                   ra.raster | rb.raster, label=f"{ra.label}|{rb.label}")
                if not smooth(union):
                    ok = False
    return ok
