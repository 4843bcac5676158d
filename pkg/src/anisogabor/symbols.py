"""Symbols sampled on the phase grid.

Includes the power Hamiltonian with a smooth excision near the origin, the
mollified cutoff adapted to anisotropic neighborhoods, ellipticity and
symbol-class checks by finite differences, and the anti-Wick (localization)
operator that serves as the executable quantization.
"""

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from ._accel import jit, use_numba
from .geometry import (AnisoParams, PhaseGrid, RegionMask, aniso_neighborhood, separation_mu,
                       theta_weight, wkm_weight, _dilate_raster)
from .signal import SampledSignal
from .stft import STFTField, Window, analyze, synthesize

ELLIPTIC_FLOOR = 1e-9
MIN_POINTS_PER_RADIUS = 8


# ---------------------------------------------------------------------------
# smooth steps


def _s(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def _ds(t):
    t = np.asarray(t, dtype=float)
    tt = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.exp(-1.0 / tt) / (tt * tt), 0.0)


def smooth_step(tau):
    """C-infinity step: 0 for tau <= 0, 1 for tau >= 1."""
    a, b = _s(tau), _s(1.0 - np.asarray(tau, dtype=float))
    return a / (a + b)


def smooth_step_prime(tau):
    a, b = _s(tau), _s(1.0 - np.asarray(tau, dtype=float))
    da, db = _ds(tau), -_ds(1.0 - np.asarray(tau, dtype=float))
    return (da * (a + b) - a * (da + db)) / (a + b) ** 2


def excision(x, xi, mu):
    """``psi_mu``: 0 on the closed ball of radius ``mu/2``, 1 off the ball of radius ``mu``."""
    t = np.asarray(x, dtype=float) ** 2 + np.asarray(xi, dtype=float) ** 2
    return smooth_step((t - 0.25 * mu * mu) / (0.75 * mu * mu))


def excision_grad(x, xi, mu):
    """Gradient ``(d/dx, d/dxi)`` of :func:`excision`."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    t = x * x + xi * xi
    g = smooth_step_prime((t - 0.25 * mu * mu) / (0.75 * mu * mu)) / (0.75 * mu * mu)
    return 2.0 * x * g, 2.0 * xi * g


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymbolField:
    values: np.ndarray
    grid: PhaseGrid
    order_r: float
    params: AnisoParams
    label: str = ""
    func: Optional[Callable] = field(default=None, repr=False)
    bound_K: float = field(default=np.nan, init=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.nx, self.grid.nxi):
            raise ValueError("symbol shape does not match its grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("symbol values must be finite")
        X, XI = self.grid.mesh()
        K = float(np.max(np.abs(v) / theta_weight(self.params, X, XI) ** self.order_r))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bound_K", K)

    def resample(self, grid: PhaseGrid) -> "SymbolField":
        if self.func is None:
            raise ValueError("symbol has no analytic form to resample")
        X, XI = grid.mesh()
        return SymbolField(self.func(X, XI), grid, self.order_r, self.params, self.label, self.func)


def constant_symbol(value, grid: PhaseGrid, params: AnisoParams = AnisoParams()):
    def f(x, xi):
        return np.full(np.broadcast(np.asarray(x), np.asarray(xi)).shape, float(value))

    X, XI = grid.mesh()
    return SymbolField(f(X, XI), grid, 0.0, params, f"const({value:g})", f)


def power_symbol(x, xi, p_exp, k, m, mu):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    base = x ** (2 * k) + xi ** (2 * m)
    with np.errstate(divide="ignore", invalid="ignore"):
        core = np.where(base > 0, base, 1.0) ** p_exp
    return np.where(base > 0, excision(x, xi, mu) * core, 0.0)


def power_hamiltonian(p_exp: float, k: int, m: int, mu: float, grid: PhaseGrid, rho: float = 1.0):
    """``psi_mu(x, xi) (x^{2k} + xi^{2m})^p`` on the grid; order ``2 k p``."""
    if p_exp == 0:
        raise ValueError("power must be nonzero")
    if mu <= 0:
        raise ValueError("mu must be positive")

    def f(x, xi):
        return power_symbol(x, xi, p_exp, k, m, mu)

    X, XI = grid.mesh()
    return SymbolField(f(X, XI), grid, 2 * k * p_exp, AnisoParams(k, m, rho),
                       f"power({k},{m},{p_exp:g})", f)


# ---------------------------------------------------------------------------
# mollified cutoff


def _psi_raw(u):
    # exp(-1/(1 - 4u)) on [0, 1/4), glued smoothly to zero on (-1/4, 0]
    u = np.asarray(u, dtype=float)
    inside = (u > -0.25) & (u < 0.25)
    with np.errstate(divide="ignore", over="ignore"):
        core = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - 4.0 * u, 1.0)), 0.0)
    glue = np.where(u >= 0, 1.0, smooth_step(4.0 * u + 1.0))
    return core * glue


_PSI_C = 1.0 / quad(lambda s: float(_psi_raw(s * s)), -0.5, 0.5, epsabs=1e-14, epsrel=1e-14)[0]


def bump_psi(u):
    """``psi >= 0`` with support in [-1/4, 1/4] and ``int psi(x^2) dx = 1``."""
    return _PSI_C * _psi_raw(u)


def bump_phi(s):
    """``phi(s) = psi(s^2) = c exp(-1/(1 - 4 s^2))``, supported in [-1/2, 1/2]."""
    s = np.asarray(s, dtype=float)
    return bump_psi(s * s)


@jit
def _phi_scalar(s):
    u = s * s
    if u >= 0.25:
        return 0.0
    return np.exp(-1.0 / (1.0 - 4.0 * u))


@jit
def _mollify_loop(S, sat, hx, hxi, ax, bx):
    nx, nxi = S.shape
    out = np.zeros((nx, nxi))
    wy = np.empty(2 * nxi + 3)
    for i in range(nx):
        for j in range(nxi):
            a = ax[i, j]
            b = bx[i, j]
            ri = min(int(0.5 * a / hx), nx)
            rj = min(int(0.5 * b / hxi), nxi)
            i0 = max(i - ri, 0)
            i1 = min(i + ri, nx - 1)
            j0 = max(j - rj, 0)
            j1 = min(j + rj, nxi - 1)
            cnt = sat[i1 + 1, j1 + 1] - sat[i0, j1 + 1] - sat[i1 + 1, j0] + sat[i0, j0]
            if cnt == 0:
                continue
            if cnt == (2 * ri + 1) * (2 * rj + 1):
                out[i, j] = 1.0
                continue
            sy = 0.0
            for d in range(-rj, rj + 1):
                wy[d + rj] = _phi_scalar(d * hxi / b)
                sy += wy[d + rj]
            sx = 0.0
            acc = 0.0
            for di in range(-ri, ri + 1):
                wx = _phi_scalar(di * hx / a)
                sx += wx
                ii = i + di
                if ii < 0 or ii >= nx or wx == 0.0:
                    continue
                row = 0.0
                for d in range(-rj, rj + 1):
                    jj = j + d
                    if jj < 0 or jj >= nxi:
                        continue
                    if S[ii, jj]:
                        row += wy[d + rj]
                acc += wx * row
            out[i, j] = acc / (sx * sy)
    return out


def _mollify_numpy(S, hx, hxi, ax, bx):
    nx, nxi = S.shape
    ri_max = int(0.5 * ax.max() / hx)
    rj_max = int(0.5 * bx.max() / hxi)
    pad = np.zeros((nx + 2 * ri_max, nxi + 2 * rj_max))
    pad[ri_max:ri_max + nx, rj_max:rj_max + nxi] = S
    ri = np.floor(0.5 * ax / hx)
    rj = np.floor(0.5 * bx / hxi)
    sx = np.zeros((nx, nxi))
    sy = np.zeros((nx, nxi))
    wys = []
    for d in range(-rj_max, rj_max + 1):
        wy = np.where(np.abs(d) <= rj, bump_phi(d * hxi / bx), 0.0)
        wys.append(wy)
        sy += wy
    acc = np.zeros((nx, nxi))
    for di in range(-ri_max, ri_max + 1):
        wx = np.where(np.abs(di) <= ri, bump_phi(di * hx / ax), 0.0)
        sx += wx
        if not wx.any():
            continue
        row = np.zeros((nx, nxi))
        for n, d in enumerate(range(-rj_max, rj_max + 1)):
            row += wys[n] * pad[ri_max + di:ri_max + di + nx, rj_max + d:rj_max + d + nxi]
        acc += wx * row
    return acc / (sx * sy)


def mollify_raster(S, hx, hxi, ax, bx, backend=None):
    """Normalized discrete mollification of a boolean raster.

    ``ax``, ``bx`` are the per-cell kernel scales; the kernel at a cell is
    ``phi(dx / ax) phi(dxi / bx)``, supported on half-widths ``ax/2``, ``bx/2``.
    Weights are divided by their discrete sum so constants are reproduced
    exactly.
    """
    S = np.ascontiguousarray(S, dtype=np.bool_)
    ax = np.ascontiguousarray(ax, dtype=float)
    bx = np.ascontiguousarray(bx, dtype=float)
    # summed-area table: cells whose kernel box is all in or all out of S are
    # exactly 1 or 0, which the weighted sum reproduces up to rounding
    sat = np.zeros((S.shape[0] + 1, S.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = np.cumsum(np.cumsum(S, axis=0), axis=1)
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        return _mollify_loop(S, sat, float(hx), float(hxi), ax, bx)
    out = _mollify_numpy(S, float(hx), float(hxi), ax, bx)
    nx, nxi = S.shape
    ri = np.minimum((0.5 * ax / hx).astype(np.int64), nx)
    rj = np.minimum((0.5 * bx / hxi).astype(np.int64), nxi)
    I, J = np.meshgrid(np.arange(nx), np.arange(nxi), indexing="ij")
    i0, i1 = np.maximum(I - ri, 0), np.minimum(I + ri, nx - 1)
    j0, j1 = np.maximum(J - rj, 0), np.minimum(J + rj, nxi - 1)
    cnt = sat[i1 + 1, j1 + 1] - sat[i0, j1 + 1] - sat[i1 + 1, j0] + sat[i0, j0]
    out[cnt == 0] = 0.0
    out[cnt == (2 * ri + 1) * (2 * rj + 1)] = 1.0
    return out


@dataclass(frozen=True, eq=False)
class CutoffSpec:
    eps: float
    delta: float
    params: AnisoParams
    omega: RegionMask
    mu: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.eps < self.delta < 1):
            raise ValueError("need 0 < eps < delta < 1")
        if self.mu is None:
            object.__setattr__(self, "mu", separation_mu(self.params, self.omega, self.eps, self.delta))
        elif not (0 < self.mu <= 1):
            raise ValueError("mu must lie in (0, 1]")

    def to_dict(self):
        from .io import region_to_dict
        p = self.params
        return {"eps": self.eps, "delta": self.delta, "mu": self.mu,
                "params": {"k": p.k, "m": p.m, "rho": p.rho}, "omega": region_to_dict(self.omega)}


def mollified_cutoff(spec: CutoffSpec, grid: Optional[PhaseGrid] = None) -> SymbolField:
    """Cutoff equal to 1 on ``Omega_{rho,eps}`` and 0 off ``Omega_{rho,delta}``.

    The region must be rasterized on ``grid`` (defaults to the region's grid).
    """
    grid = grid or spec.omega.grid
    if grid != spec.omega.grid:
        raise ValueError("cutoff grid must be the region's grid")
    p = spec.params
    inner = aniso_neighborhood(p, spec.omega, spec.eps)
    outer = aniso_neighborhood(p, spec.omega, spec.delta)
    # the separation property on the lattice is part of the contract
    a_in = _dilate_raster(p, grid, inner.raster, spec.mu)
    a_out = _dilate_raster(p, grid, ~outer.raster, spec.mu) if (~outer.raster).any() else ~outer.raster
    if (a_in & a_out).any():
        raise ValueError("mu does not separate the neighborhoods on this grid")
    X, XI = grid.mesh()
    w = wkm_weight(p, X, XI)
    ax = spec.mu * w ** (p.rho / p.k)
    bx = spec.mu * w ** (p.rho / p.m)
    rel = outer.raster
    if (0.5 * ax[rel]).min() < MIN_POINTS_PER_RADIUS * grid.hx or \
            (0.5 * bx[rel]).min() < MIN_POINTS_PER_RADIUS * grid.hxi:
        raise ValueError("under-resolved mollifier")
    q = mollify_raster(a_in, grid.hx, grid.hxi, ax, bx)
    q = np.clip(q, 0.0, 1.0)
    return SymbolField(q, grid, 0.0, p, f"cutoff({spec.omega.label})")


# ---------------------------------------------------------------------------


def ellipticity_test(a: SymbolField, omega: RegionMask, R: float):
    """``min |a| / theta^r`` over the part of ``omega`` outside the ball of radius ``R``."""
    if omega.grid != a.grid:
        raise ValueError("region and symbol live on different grids")
    X, XI = a.grid.mesh()
    sel = omega.raster & (np.hypot(X, XI) >= R)
    if not sel.any():
        raise ValueError("nothing to test")
    ratio = np.abs(a.values[sel]) / theta_weight(a.params, X[sel], XI[sel]) ** a.order_r
    best = float(ratio.min())
    return best > ELLIPTIC_FLOOR, best


def _fd(values, order, h, axis):
    """Centered difference of ``order`` along ``axis``.

    Even orders use unit steps, odd orders steps of ``2h`` so that the stencil
    stays on the lattice.  Returns the trimmed array and the trim width.
    """
    n = values.shape[axis]
    step = 1 if order % 2 == 0 else 2
    span = step * order
    acc = 0.0
    for j in range(order + 1):
        sl = [slice(None)] * values.ndim
        sl[axis] = slice(step * j, n - span + step * j)
        acc = acc + (-1) ** (order - j) * comb(order, j) * values[tuple(sl)]
    return acc / (step * h) ** order, span // 2


def finite_difference(values, alpha, beta, hx, hxi):
    """Central difference approximation of ``d_x^alpha d_xi^beta``.

    Returns the derivative array and the number of trimmed border cells on
    each axis.
    """
    v = values
    px = pxi = 0
    if alpha:
        v, px = _fd(v, alpha, hx, 0)
    if beta:
        v, pxi = _fd(v, beta, hxi, 1)
    return v, px, pxi


def symbol_constants(a: SymbolField, max_order: int = 3, region=None):
    """``max |D^{alpha,beta} a| theta^{-r + rho(alpha + sigma beta)}`` per order pair."""
    if not 0 <= max_order <= 3:
        raise ValueError("max_order must be between 0 and 3")
    p = a.params
    X, XI = a.grid.mesh()
    th = theta_weight(p, X, XI)
    table = {}
    for alpha in range(max_order + 1):
        for beta in range(max_order + 1 - alpha):
            d, px, pxi = finite_difference(a.values, alpha, beta, a.grid.hx, a.grid.hxi)
            sl = (slice(px, X.shape[0] - px), slice(pxi, X.shape[1] - pxi))
            wexp = -a.order_r + p.rho * (alpha + p.sigma_f * beta)
            vals = np.abs(d) * th[sl] ** wexp
            if region is not None:
                vals = np.where(region[sl], vals, 0.0)
            table[(alpha, beta)] = float(vals.max()) if vals.size else 0.0
    return table


def symbol_estimate_check(a: SymbolField, max_order: int = 3, refined: Optional[SymbolField] = None,
                          region=None, atol: float = 1e-9):
    """Fitted constants on ``a`` and on a twice finer version.

    Returns ``(ok, coarse_table, fine_table)``; ``ok`` requires every constant
    to be finite and to change by less than a factor 2 under refinement.
    Constants below ``atol`` on both grids count as zero.
    """
    if refined is None:
        g = a.grid
        refined = a.resample(PhaseGrid(g.x_max, g.xi_max, 2 * g.nx - 1, 2 * g.nxi - 1))
    t1 = symbol_constants(a, max_order, region if region is None else region(a.grid))
    t2 = symbol_constants(refined, max_order, region if region is None else region(refined.grid))
    ok = True
    for key in t1:
        c1, c2 = t1[key], t2[key]
        if not (np.isfinite(c1) and np.isfinite(c2)):
            ok = False
        elif max(c1, c2) > atol and not (0.5 < c2 / max(c1, 1e-300) < 2.0):
            ok = False
    return ok, t1, t2


def antiwick_apply(a: SymbolField, u: SampledSignal, window: Optional[Window] = None) -> SampledSignal:
    """``A_a u = (2 pi)^{-1/2} iint a V_psi u Pi(z) psi dz`` with the unit Gaussian window."""
    if np.iscomplexobj(a.values) and np.any(np.imag(a.values)):
        raise ValueError("anti-Wick symbol must be real")
    w = window or Window("gaussian", grid=u.grid)
    V = analyze(u, w, a.grid)
    out = synthesize(STFTField(a.values * V.values, a.grid, w, u.label, u.grid), w, u.grid)
    return SampledSignal(out.values, u.x_max, f"A[{a.label}]{u.label}")
