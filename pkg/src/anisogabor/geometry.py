"""Anisotropic weights, structural constants and phase-plane regions.

Everything here works on the phase plane of dimension one, points ``(x, xi)``.
The anisotropy is stored as the integer pair ``(k, m)`` and every exponent is
formed from that pair, so ``sigma = 2/3`` never turns into a rounded float
before it is used.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable

import numpy as np

from ._accel import jit, use_numba


@dataclass(frozen=True)
class AnisoParams:
    """Anisotropy ``sigma = k/m`` and regularity ``rho`` in (0, 1]."""

    k: int = 1
    m: int = 1
    rho: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k or int(self.m) != self.m:
            raise ValueError("k and m must be integers")
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be positive")
        if gcd(self.k, self.m) != 1:
            raise ValueError("k and m must be coprime")
        if not (0.0 < self.rho <= 1.0):
            raise ValueError("rho must lie in (0, 1]")

    @property
    def sigma(self) -> Fraction:
        return Fraction(self.k, self.m)

    @property
    def inv_sigma(self) -> float:
        return self.m / self.k

    @property
    def sigma_f(self) -> float:
        return self.k / self.m

    def dual(self) -> "AnisoParams":
        """Parameters with ``sigma`` replaced by ``1/sigma``."""
        return AnisoParams(self.m, self.k, self.rho)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    xi: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.xi)):
            raise ValueError("phase point must be finite")


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform lattice on ``[-x_max, x_max] x [-xi_max, xi_max]``.

    Arrays living on the grid have shape ``(nx, nxi)``: the first index runs
    over position, the second over frequency.
    """

    x_max: float = 20.0
    xi_max: float = 20.0
    nx: int = 257
    nxi: int = 257

    def __post_init__(self):
        if self.x_max <= 0 or self.xi_max <= 0:
            raise ValueError("grid extents must be positive")
        if self.nx < 8 or self.nxi < 8:
            raise ValueError("grid needs at least 8 points per axis")

    @property
    def hx(self) -> float:
        return 2.0 * self.x_max / (self.nx - 1)

    @property
    def hxi(self) -> float:
        return 2.0 * self.xi_max / (self.nxi - 1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.nx)

    @property
    def xis(self) -> np.ndarray:
        return np.linspace(-self.xi_max, self.xi_max, self.nxi)

    def mesh(self):
        return np.meshgrid(self.xs, self.xis, indexing="ij")

    def point(self, i: int, j: int) -> PhasePoint:
        return PhasePoint(float(self.xs[i]), float(self.xis[j]))

    def index(self, x: float, xi: float):
        """Nearest lattice index of ``(x, xi)``, clipped to the grid."""
        i = int(np.clip(np.rint((x + self.x_max) / self.hx), 0, self.nx - 1))
        j = int(np.clip(np.rint((xi + self.xi_max) / self.hxi), 0, self.nxi - 1))
        return i, j

    def to_dict(self):
        return {"x_max": self.x_max, "xi_max": self.xi_max, "nx": self.nx, "nxi": self.nxi}


Predicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class RegionMask:
    """A region given by a vectorized predicate and its raster on ``grid``.

    ``predicate(x, xi)`` takes broadcastable arrays and returns booleans.
    """

    predicate: Predicate
    grid: PhaseGrid
    raster: np.ndarray = field(default=None)
    label: str = ""

    def __post_init__(self):
        if self.raster is None:
            X, XI = self.grid.mesh()
            r = np.asarray(self.predicate(X, XI), dtype=bool)
            object.__setattr__(self, "raster", np.broadcast_to(r, X.shape).copy())
        self.raster.setflags(write=False)

    def contains(self, z: PhasePoint) -> bool:
        return bool(self.predicate(np.asarray(z.x), np.asarray(z.xi)))

    def complement(self) -> "RegionMask":
        pred = self.predicate
        return RegionMask(lambda x, xi: ~np.asarray(pred(x, xi), dtype=bool),
                          self.grid, ~self.raster, label=f"not({self.label})")

    def is_empty(self) -> bool:
        return not self.raster.any()

    @classmethod
    def from_function(cls, func, grid, label=""):
        return cls(func, grid, label=label)

    @classmethod
    def lattice_point(cls, grid: PhaseGrid, x: float, xi: float, label=""):
        """The single lattice cell nearest to ``(x, xi)``."""
        i, j = grid.index(x, xi)
        x0, xi0 = grid.xs[i], grid.xis[j]
        hx, hxi = grid.hx, grid.hxi

        def pred(X, XI):
            return (np.abs(X - x0) < 0.5 * hx) & (np.abs(XI - xi0) < 0.5 * hxi)

        return cls(pred, grid, label=label or f"point({x0:g},{xi0:g})")


def _theta(x, xi, inv_sigma):
    return 1.0 + np.abs(x) + np.abs(xi) ** inv_sigma


def theta_weight(p: AnisoParams, x, xi=None):
    """``1 + |x| + |xi|^(1/sigma)``; accepts a PhasePoint or arrays."""
    if isinstance(x, PhasePoint):
        x, xi = x.x, x.xi
    return _theta(np.asarray(x, dtype=float), np.asarray(xi, dtype=float), p.inv_sigma)


def wkm_weight(p: AnisoParams, x, xi=None):
    """``(1 + x^{2k} + xi^{2m})^{1/2}``."""
    if isinstance(x, PhasePoint):
        x, xi = x.x, x.xi
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + x ** (2 * p.k) + xi ** (2 * p.m))


def structural_constants(p: AnisoParams):
    """Return ``(C_sigma, B_sigma, c_k)``."""
    s_inv = Fraction(p.m, p.k)
    c_sigma = 1.0 if p.k >= p.m else 2.0 ** float(s_inv - 1)
    b_sigma = 2.0 ** max(0.0, float(s_inv - 1))
    c_k = 2.0 ** (2 * p.k - 1)
    return c_sigma, b_sigma, c_k


def _c_sigma(k, m):
    return 1.0 if k >= m else 2.0 ** (m / k - 1.0)


def epsilon_conditions(p: AnisoParams, eps: float):
    """Evaluate the two strict inequalities that bound admissible ``eps``."""
    cs = _c_sigma(p.k, p.m)
    cs_dual = _c_sigma(p.m, p.k)
    sig = p.sigma_f
    one = eps + eps ** p.inv_sigma * cs < 1.0
    two = eps * (1.0 - eps) ** (-sig) * cs_dual ** 2 < 1.0
    return bool(one and two)


def feasible_epsilon_bound(p: AnisoParams, rtol: float = 1e-12) -> float:
    """Supremum of ``eps`` in (0, 1) satisfying both admissibility conditions.

    Both conditions are monotone in ``eps``, so the feasible set is an interval
    ``(0, b)`` and bisection finds ``b``.
    """
    lo, hi = 0.0, 1.0
    while hi - lo > rtol * max(lo, 1e-300):
        mid = 0.5 * (lo + hi)
        if epsilon_conditions(p, mid):
            lo = mid
        else:
            hi = mid
    return lo


def sigma_dilate(p: AnisoParams, z, lam: float):
    """Anisotropic dilation ``(lam x, lam^sigma xi)``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if isinstance(z, PhasePoint):
        return PhasePoint(lam * z.x, lam ** p.sigma_f * z.xi)
    x, xi = z
    return lam * np.asarray(x), lam ** p.sigma_f * np.asarray(xi)


# ---------------------------------------------------------------------------
# Raster dilation by point-dependent boxes.  Each source cell (i, j) paints the
# index box [i-a, i+a] x [j-b, j+b]; the union is accumulated with a 2D
# difference array so the cost is linear in the number of cells.


@jit
def _paint_boxes_loop(ii, jj, ra, rb, nx, nxi):
    diff = np.zeros((nx + 1, nxi + 1), dtype=np.int64)
    for n in range(ii.shape[0]):
        i0 = max(ii[n] - ra[n], 0)
        i1 = min(ii[n] + ra[n], nx - 1)
        j0 = max(jj[n] - rb[n], 0)
        j1 = min(jj[n] + rb[n], nxi - 1)
        diff[i0, j0] += 1
        diff[i0, j1 + 1] -= 1
        diff[i1 + 1, j0] -= 1
        diff[i1 + 1, j1 + 1] += 1
    out = np.zeros((nx, nxi), dtype=np.bool_)
    acc = np.zeros(nxi + 1, dtype=np.int64)
    for i in range(nx):
        run = 0
        for j in range(nxi):
            run += diff[i, j]
            acc[j] += run
            out[i, j] = acc[j] > 0
    return out


def _paint_boxes_numpy(ii, jj, ra, rb, nx, nxi):
    diff = np.zeros((nx + 1, nxi + 1), dtype=np.int64)
    i0 = np.maximum(ii - ra, 0)
    i1 = np.minimum(ii + ra, nx - 1)
    j0 = np.maximum(jj - rb, 0)
    j1 = np.minimum(jj + rb, nxi - 1)
    np.add.at(diff, (i0, j0), 1)
    np.add.at(diff, (i0, j1 + 1), -1)
    np.add.at(diff, (i1 + 1, j0), -1)
    np.add.at(diff, (i1 + 1, j1 + 1), 1)
    return np.cumsum(np.cumsum(diff, axis=0), axis=1)[:nx, :nxi] > 0


def paint_boxes(ii, jj, ra, rb, nx, nxi, backend=None):
    ii = np.ascontiguousarray(ii, dtype=np.int64)
    jj = np.ascontiguousarray(jj, dtype=np.int64)
    ra = np.ascontiguousarray(ra, dtype=np.int64)
    rb = np.ascontiguousarray(rb, dtype=np.int64)
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        return _paint_boxes_loop(ii, jj, ra, rb, nx, nxi)
    return _paint_boxes_numpy(ii, jj, ra, rb, nx, nxi)


def _cells(r, h):
    # radii in whole cells, rounded up; the tiny slack absorbs float noise
    return np.ceil(r / h - 1e-9).astype(np.int64)


def _dilate_raster(p: AnisoParams, grid: PhaseGrid, raster, eps):
    ii, jj = np.nonzero(raster)
    th = theta_weight(p, grid.xs[ii], grid.xis[jj])
    ra = _cells(eps * th ** p.rho, grid.hx)
    rb = _cells(eps * th ** (p.rho * p.sigma_f), grid.hxi)
    return paint_boxes(ii, jj, ra, rb, grid.nx, grid.nxi)


def aniso_neighborhood(p: AnisoParams, omega: RegionMask, eps: float) -> RegionMask:
    """Rasterized anisotropic neighborhood ``Omega_{rho, eps}``.

    Every lattice cell of ``omega`` contributes the box of half-widths
    ``eps theta^rho`` and ``eps theta^(rho sigma)``, rounded up to whole
    cells, so the raster contains the exact neighborhood sampled on the grid.
    The predicate applies the same rounded boxes around the lattice cells of
    ``omega``, which keeps predicate and raster consistent on the lattice.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if omega.is_empty():
        raise ValueError("empty region")
    grid = omega.grid
    raster = _dilate_raster(p, grid, omega.raster, eps)

    ii, jj = np.nonzero(omega.raster)
    ys, etas = grid.xs[ii], grid.xis[jj]
    th = theta_weight(p, ys, etas)
    ax = _cells(eps * th ** p.rho, grid.hx) * grid.hx + 1e-9 * grid.hx
    bx = _cells(eps * th ** (p.rho * p.sigma_f), grid.hxi) * grid.hxi + 1e-9 * grid.hxi

    def pred(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        flat_x, flat_xi = np.broadcast_arrays(x, xi)
        out = np.zeros(flat_x.shape, dtype=bool)
        fx, fxi, fo = flat_x.ravel(), flat_xi.ravel(), out.reshape(-1)
        for start in range(0, fx.size, 512):
            sx = fx[start:start + 512, None]
            sxi = fxi[start:start + 512, None]
            hit = (np.abs(sx - ys) <= ax) & (np.abs(sxi - etas) <= bx)
            fo[start:start + 512] = hit.any(axis=1)
        return out

    return RegionMask(pred, grid, raster, label=f"nbhd({omega.label},{eps:g})")


def separation_mu(p: AnisoParams, omega: RegionMask, eps: float, delta: float,
                  mu_min: float = 1e-6) -> float:
    """Largest ``mu`` on the halving ladder from ``min(1, delta - eps)`` that
    separates the ``mu``-neighborhoods of ``Omega_eps`` and of the complement of
    ``Omega_delta`` on the grid."""
    if not (0 < eps < delta < 1):
        raise ValueError("need 0 < eps < delta < 1")
    inner = aniso_neighborhood(p, omega, eps).raster
    outer = ~aniso_neighborhood(p, omega, delta).raster
    mu = min(1.0, delta - eps)
    while mu >= mu_min:
        a = _dilate_raster(p, omega.grid, inner, mu)
        b = _dilate_raster(p, omega.grid, outer, mu) if outer.any() else outer
        if not (a & b).any():
            return mu
        mu *= 0.5
    raise ValueError("no separating mu at this resolution")


# ---------------------------------------------------------------------------
# Sampled constants for the weight inequalities.  Each returns the largest
# observed ratio over fixed-seed samples.


def _sample_points(rng, n, scale=10.0):
    # mixture of scales so that small and large arguments are both exercised
    mag = 10.0 ** rng.uniform(-3, np.log10(scale) + 1, size=(n, 2))
    return mag * rng.choice([-1.0, 1.0], size=(n, 2))


def fit_peetre_constant(p: AnisoParams, s: float, n: int = 10_000, seed: int = 0):
    rng = np.random.default_rng(seed)
    z = _sample_points(rng, n)
    w = _sample_points(rng, n)
    tz = theta_weight(p, z[:, 0], z[:, 1])
    tw = theta_weight(p, w[:, 0], w[:, 1])
    tzw = theta_weight(p, z[:, 0] + w[:, 0], z[:, 1] + w[:, 1])
    log_ratio = s * np.log(tzw) - s * np.log(tz) - abs(s) * np.log(tw)
    return float(np.exp(log_ratio.max()))


def fit_sandwich_constants(p: AnisoParams, n: int = 10_000, seed: int = 0):
    """``K1, K2`` with ``<z>^min(1,1/s) <= K1 theta`` and ``theta <= K2 <z>^max(1,1/s)``."""
    rng = np.random.default_rng(seed)
    z = _sample_points(rng, n)
    th = theta_weight(p, z[:, 0], z[:, 1])
    br = np.sqrt(1.0 + z[:, 0] ** 2 + z[:, 1] ** 2)
    lo = min(1.0, p.inv_sigma)
    hi = max(1.0, p.inv_sigma)
    k1 = float(np.max(br ** lo / th))
    k2 = float(np.max(th / br ** hi))
    return k1, k2


def sample_neighbor_pairs(p: AnisoParams, eps: float, n: int = 10_000, seed: int = 0):
    """Pairs ``(y, eta)``, ``(x, xi)`` with ``(x, xi)`` in the open box around
    ``(y, eta)`` of half-widths ``eps theta^rho`` and ``eps theta^(rho sigma)``."""
    rng = np.random.default_rng(seed)
    y = _sample_points(rng, n)
    u = rng.uniform(-1.0, 1.0, size=(n, 2)) * (1.0 - 1e-12)
    th = theta_weight(p, y[:, 0], y[:, 1])
    x = y[:, 0] + u[:, 0] * eps * th ** p.rho
    xi = y[:, 1] + u[:, 1] * eps * th ** (p.rho * p.sigma_f)
    return y, np.stack([x, xi], axis=1)


def fit_neighbor_constant(p: AnisoParams, eps: float, n: int = 10_000, seed: int = 0):
    """Observed ``max theta(y, eta) / theta(x, xi)`` over neighboring pairs."""
    y, z = sample_neighbor_pairs(p, eps, n, seed)
    ratio = theta_weight(p, y[:, 0], y[:, 1]) / theta_weight(p, z[:, 0], z[:, 1])
    return float(max(1.0, ratio.max()))


def fit_neighbor_ladder(p: AnisoParams, eps_ladder, n: int = 10_000, seed: int = 0):
    """Fitted constants along an increasing ``eps`` ladder.

    Pairs admissible for a smaller ``eps`` are admissible for every larger one,
    so the estimate at rung ``i`` pools the samples of rungs ``0..i``.
    """
    eps_ladder = sorted(eps_ladder)
    out, best = [], 1.0
    for i, eps in enumerate(eps_ladder):
        best = max(best, fit_neighbor_constant(p, eps, n, seed + i))
        out.append(best)
    return out

