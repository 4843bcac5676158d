"""Hamiltonian flows of ``a = psi_mu(x, xi) (x^{2k} + xi^{2m})^p``.

Hamilton's equations are ``x' = da/dxi``, ``xi' = -da/dx``.  For ``k = m = 1``
the flow is a clockwise rotation with an energy dependent angle; in general
RK4 is used with a step tied to the orbit period.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, gamma, pi

import numpy as np

from ._accel import jit, use_numba
from .geometry import AnisoParams, PhaseGrid, PhasePoint, RegionMask
from .symbols import excision, excision_grad

DEFAULT_MU = 0.25


def _as_fraction(p):
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p)
    return Fraction(p).limit_denominator(10 ** 9)


@dataclass(frozen=True)
class HamiltonianSpec:
    k: int = 1
    m: int = 1
    p_exp: Fraction = Fraction(1)
    mu: float = DEFAULT_MU

    def __post_init__(self):
        object.__setattr__(self, "p_exp", _as_fraction(self.p_exp))
        AnisoParams(self.k, self.m)  # validates k, m
        if self.p_exp == 0:
            raise ValueError("power must be nonzero")
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    @property
    def p(self) -> float:
        return float(self.p_exp)

    @property
    def p_c(self) -> Fraction:
        return (Fraction(1, self.k) + Fraction(1, self.m)) / 2

    @property
    def sigma(self) -> Fraction:
        return Fraction(self.k, self.m)

    @property
    def supercritical(self) -> bool:
        """``p_c < p <= p_c + min(1/k, 1/m) / 4``."""
        return self.p_c < self.p_exp <= self.p_c + min(Fraction(1, self.k), Fraction(1, self.m)) / 4

    def rho_interval(self):
        """``[1/2, 1 - 2 max(k, m) (p - p_c)]`` as exact fractions."""
        return Fraction(1, 2), 1 - 2 * max(self.k, self.m) * (self.p_exp - self.p_c)

    def regime(self, rho: float = 1.0) -> str:
        if self.p_exp == self.p_c:
            return "critical"
        if 2 * self.k * float(self.p_exp) < rho * (1 + float(self.sigma)):
            return "subcritical"
        if self.supercritical:
            return "supercritical"
        return "unclassified"

    def energy(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return x ** (2 * self.k) + xi ** (2 * self.m)

    def __call__(self, x, xi):
        """The symbol ``a`` itself."""
        E = self.energy(x, xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = np.where(E > 0, np.where(E > 0, E, 1.0) ** self.p, 0.0)
        return excision(x, xi, self.mu) * core


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    energy: np.ndarray

    @property
    def points(self):
        return [PhasePoint(float(a), float(b)) for a, b in zip(self.x, self.xi)]

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(float(self.x[-1]), float(self.xi[-1]))

    @property
    def drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / max(abs(e0), 1e-300))


def period(h: HamiltonianSpec, z) -> float:
    """Orbit period ``Gamma(1/2k) Gamma(1/2m) / (k m p Gamma(1/2k + 1/2m)) E^{p_c - p}``."""
    x, xi = (z.x, z.xi) if isinstance(z, PhasePoint) else z
    E = np.asarray(h.energy(x, xi), dtype=float)
    a, b = 1.0 / (2 * h.k), 1.0 / (2 * h.m)
    c = gamma(a) * gamma(b) / (h.k * h.m * h.p * gamma(a + b))
    T = c * E ** float(h.p_c - h.p_exp)
    return float(T) if T.ndim == 0 else T


def rotation_angle(h: HamiltonianSpec, r2, t):
    """Clockwise angle of the exact ``k = m = 1`` flow after time ``t``.

    The excised symbol is radial, ``a = g(r^2)``, so the flow is a rotation by
    ``2 g'(r^2) t``; outside the ball of radius ``mu`` this is
    ``2 p r^{2(p-1)} t``.
    """
    if not (h.k == 1 and h.m == 1):
        raise ValueError("closed form needs k = m = 1")
    r2 = np.asarray(r2, dtype=float)
    mu = h.mu
    # g(s) = step(tau(s)) s^p with tau = (s - mu^2/4) / (3 mu^2 / 4)
    r = np.sqrt(r2)
    gx, _ = excision_grad(r, 0.0, mu)  # d/dx of psi at (r, 0) = 2 r step' / (0.75 mu^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dpsi_ds = np.where(r > 0, gx / (2.0 * np.where(r > 0, r, 1.0)), 0.0)
        sp = np.where(r2 > 0, np.where(r2 > 0, r2, 1.0) ** h.p, 0.0)
        sp1 = np.where(r2 > 0, h.p * np.where(r2 > 0, r2, 1.0) ** (h.p - 1.0), 0.0)
    gprime = dpsi_ds * sp + excision(r, 0.0, mu) * sp1
    return 2.0 * gprime * t


def rotate_clockwise(x, xi, angle):
    c, s = np.cos(angle), np.sin(angle)
    return c * x + s * xi, -s * x + c * xi


def exact_rotation_flow(h: HamiltonianSpec, x, xi, t):
    """Exact flow for ``k = m = 1`` at every point, including the excision ball."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return rotate_clockwise(x, xi, rotation_angle(h, x * x + xi * xi, t))


def flow_closed_form(p_exp, z: PhasePoint, t: float, mu: float = DEFAULT_MU) -> PhasePoint:
    """Rotation by ``2 p (x^2 + xi^2)^{p-1} t`` clockwise (``k = m = 1``, ``|z| >= mu``)."""
    r2 = z.x * z.x + z.xi * z.xi
    if r2 < mu * mu:
        raise ValueError("inside excision ball")
    p = float(_as_fraction(p_exp))
    ang = 2.0 * p * r2 ** (p - 1.0) * t
    x, xi = rotate_clockwise(z.x, z.xi, ang)
    return PhasePoint(float(x), float(xi))


# ---------------------------------------------------------------------------
# RK4 kernels


@jit
def _sstep(tau):
    if tau <= 0.0:
        return 0.0, 0.0
    if tau >= 1.0:
        return 1.0, 0.0
    a = np.exp(-1.0 / tau)
    b = np.exp(-1.0 / (1.0 - tau))
    da = a / (tau * tau)
    db = -b / ((1.0 - tau) * (1.0 - tau))
    s = a + b
    return a / s, (da * s - a * (da + db)) / (s * s)


@jit
def _ipow(x, n):
    out = 1.0
    for _ in range(n):
        out *= x
    return out


@jit
def _symbol_and_field(x, xi, k, m, p, mu):
    xk = _ipow(x, 2 * k - 1)
    xim = _ipow(xi, 2 * m - 1)
    E = xk * x + xim * xi
    if E <= 0.0:
        return 0.0, 0.0, 0.0
    Ep = E ** p
    dE = p * Ep / E
    ax = dE * 2.0 * k * xk
    axi = dE * 2.0 * m * xim
    r2 = x * x + xi * xi
    if r2 >= mu * mu:
        return Ep, axi, -ax
    c = 0.75 * mu * mu
    psi, dpsi = _sstep((r2 - 0.25 * mu * mu) / c)
    dpsi = dpsi / c
    ax = 2.0 * x * dpsi * Ep + psi * ax
    axi = 2.0 * xi * dpsi * Ep + psi * axi
    return psi * Ep, axi, -ax


@jit
def _rk4_step(x, xi, h, k, m, p, mu):
    _, k1x, k1y = _symbol_and_field(x, xi, k, m, p, mu)
    _, k2x, k2y = _symbol_and_field(x + 0.5 * h * k1x, xi + 0.5 * h * k1y, k, m, p, mu)
    _, k3x, k3y = _symbol_and_field(x + 0.5 * h * k2x, xi + 0.5 * h * k2y, k, m, p, mu)
    _, k4x, k4y = _symbol_and_field(x + h * k3x, xi + h * k3y, k, m, p, mu)
    return (x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            xi + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y))


@jit
def _rk4_path_loop(x0, xi0, t, n, k, m, p, mu, r_bad):
    xs = np.empty(n + 1)
    xis = np.empty(n + 1)
    en = np.empty(n + 1)
    h = t / n
    x, xi = x0, xi0
    xs[0] = x
    xis[0] = xi
    en[0] = _symbol_and_field(x, xi, k, m, p, mu)[0]
    bad = False
    for s in range(n):
        x, xi = _rk4_step(x, xi, h, k, m, p, mu)
        xs[s + 1] = x
        xis[s + 1] = xi
        en[s + 1] = _symbol_and_field(x, xi, k, m, p, mu)[0]
        if x * x + xi * xi < r_bad * r_bad:
            bad = True
    return xs, xis, en, bad


@jit
def _rk4_endpoints_loop(x0, xi0, t, nsteps, k, m, p, mu, r_still):
    # steps outer, points inner: consecutive iterations are independent, which
    # hides the latency of pow; each point still keeps its own step size
    n_pts = x0.shape[0]
    xo = x0.copy()
    xio = xi0.copy()
    hs = np.zeros(n_pts)
    todo = np.zeros(n_pts, dtype=np.int64)
    for i in range(n_pts):
        if x0[i] * x0[i] + xi0[i] * xi0[i] > r_still * r_still and nsteps[i] > 0:
            hs[i] = t / nsteps[i]
            todo[i] = nsteps[i]
    n_max = 0
    for i in range(n_pts):
        n_max = max(n_max, todo[i])
    for s in range(n_max):
        for i in range(n_pts):
            if s < todo[i]:
                xo[i], xio[i] = _rk4_step(xo[i], xio[i], hs[i], k, m, p, mu)
    return xo, xio


def _field_numpy(h: HamiltonianSpec, x, xi):
    E = h.energy(x, xi)
    pos = E > 0
    Es = np.where(pos, E, 1.0)
    Ep = np.where(pos, Es ** h.p, 0.0)
    dE = h.p * Ep / Es
    ax = dE * 2.0 * h.k * x ** (2 * h.k - 1)
    axi = dE * 2.0 * h.m * xi ** (2 * h.m - 1)
    # the excision only differs from 1 inside the ball of radius mu
    ball = x * x + xi * xi < h.mu * h.mu
    if ball.any():
        bx, bxi = x[ball], xi[ball]
        psi = excision(bx, bxi, h.mu)
        gx, gxi = excision_grad(bx, bxi, h.mu)
        ax[ball] = gx * Ep[ball] + psi * ax[ball]
        axi[ball] = gxi * Ep[ball] + psi * axi[ball]
    return axi, -ax


def _rk4_numpy(h: HamiltonianSpec, x, xi, dt, n):
    for _ in range(n):
        k1 = _field_numpy(h, x, xi)
        k2 = _field_numpy(h, x + 0.5 * dt * k1[0], xi + 0.5 * dt * k1[1])
        k3 = _field_numpy(h, x + 0.5 * dt * k2[0], xi + 0.5 * dt * k2[1])
        k4 = _field_numpy(h, x + dt * k3[0], xi + dt * k3[1])
        x = x + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        xi = xi + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return x, xi


def _step_count(h: HamiltonianSpec, x, xi, t, dt_max, per_period):
    # the period formula is evaluated no closer to the origin than radius mu
    E = np.maximum(h.energy(x, xi), min(h.mu ** (2 * h.k), h.mu ** (2 * h.m)))
    a, b = 1.0 / (2 * h.k), 1.0 / (2 * h.m)
    c = gamma(a) * gamma(b) / (h.k * h.m * h.p * gamma(a + b))
    T = c * E ** float(h.p_c - h.p_exp)
    dt = np.minimum(dt_max, T / per_period)
    return np.ceil(np.abs(t) / dt - 1e-9).astype(np.int64)


def flow_rk4(h: HamiltonianSpec, z: PhasePoint, t: float, dt_max: float = 1e-2,
             per_period: int = 2000, backend=None) -> Trajectory:
    """Integrate from ``z`` for time ``t`` with ``dt = min(dt_max, T(z)/per_period)``."""
    if z.x == 0 and z.xi == 0:
        raise ValueError("initial point must be nonzero")
    n = int(_step_count(h, np.asarray(z.x), np.asarray(z.xi), t, dt_max, per_period))
    n = max(n, 1)
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        xs, xis, en, bad = _rk4_path_loop(float(z.x), float(z.xi), float(t), n,
                                          h.k, h.m, h.p, h.mu, 0.25 * h.mu)
    else:
        xs = np.empty(n + 1)
        xis = np.empty(n + 1)
        xs[0], xis[0] = z.x, z.xi
        x, xi = np.array([z.x], dtype=float), np.array([z.xi], dtype=float)
        for s in range(n):
            x, xi = _rk4_numpy(h, x, xi, t / n, 1)
            xs[s + 1], xis[s + 1] = x[0], xi[0]
        en = h(xs, xis)
        bad = bool(np.any(xs[1:] ** 2 + xis[1:] ** 2 < (0.25 * h.mu) ** 2))
    if bad:
        raise ValueError("flow enters degenerate region")
    times = np.linspace(0.0, t, n + 1)
    return Trajectory(times, xs, xis, en)


def flow_points(h: HamiltonianSpec, x, xi, t: float, dt_max: float = 1e-2,
                per_period: int = 2000, backend=None):
    """Endpoints of the flow for arrays of starting points.

    Points inside the ball of radius ``mu/2`` stay put, since ``a`` vanishes
    there.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    shape = np.broadcast(x, xi).shape
    x = np.broadcast_to(x, shape).ravel().copy()
    xi = np.broadcast_to(xi, shape).ravel().copy()
    if t == 0 or x.size == 0:
        return x.reshape(shape), xi.reshape(shape)
    n = _step_count(h, x, xi, t, dt_max, per_period)
    still = x * x + xi * xi <= (0.5 * h.mu) ** 2
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        xo, xio = _rk4_endpoints_loop(x, xi, float(t), n, h.k, h.m, h.p, h.mu, 0.5 * h.mu)
    else:
        xo, xio = x.copy(), xi.copy()
        move = ~still & (n > 0)
        # lockstep within buckets of similar step count (quarter octaves);
        # each bucket runs at its finest step
        bucket = np.floor(4 * np.log2(np.maximum(n, 1))).astype(np.int64)
        for b in np.unique(bucket[move]):
            sel = move & (bucket == b)
            nb = int(n[sel].max())
            xo[sel], xio[sel] = _rk4_numpy(h, x[sel], xi[sel], t / nb, nb)
    return xo.reshape(shape), xio.reshape(shape)


def transport_region(h: HamiltonianSpec, region: RegionMask, t: float, per_period: int = 200,
                     dt_max: float = 1e-2) -> RegionMask:
    """Image of ``region`` under the flow at time ``t``.

    A point belongs to the image when its backward image under the flow lies
    in ``region``; the raster is built that way, cell by cell.
    """
    pred = region.predicate
    if t == 0:
        return RegionMask(pred, region.grid, region.raster.copy(), label=region.label)

    def moved(x, xi):
        bx, bxi = flow_points(h, x, xi, -t, dt_max, per_period)
        return np.asarray(pred(bx, bxi), dtype=bool)

    return RegionMask(moved, region.grid, label=f"chi_{t:g}({region.label})")


def boundary_cells(raster):
    """Cells of ``raster`` with at least one 4-neighbor outside it."""
    r = np.pad(raster, 1, constant_values=False)
    inner = r[1:-1, 1:-1]
    nb_out = ~r[:-2, 1:-1] | ~r[2:, 1:-1] | ~r[1:-1, :-2] | ~r[1:-1, 2:]
    return inner & nb_out


def transport_consistency(h: HamiltonianSpec, region: RegionMask, moved: RegionMask, t: float,
                          per_period: int = 200, dt_max: float = 1e-2, skip_radius=None):
    """Fraction of forward-mapped boundary cells of ``region`` that land in
    ``moved`` (up to one cell).

    Samples leaving the grid are not counted, nor are samples within
    ``skip_radius`` (default ``mu``) of the origin, where the excision makes
    the flow shear faster than the raster resolves.
    """
    g = region.grid
    skip = h.mu if skip_radius is None else skip_radius
    ii, jj = np.nonzero(boundary_cells(region.raster))
    keep = np.hypot(g.xs[ii], g.xis[jj]) >= skip
    ii, jj = ii[keep], jj[keep]
    fx, fxi = flow_points(h, g.xs[ii], g.xis[jj], t, dt_max, per_period)
    fi = np.rint((fx + g.x_max) / g.hx).astype(int)
    fj = np.rint((fxi + g.xi_max) / g.hxi).astype(int)
    ok_grid = (fi >= 0) & (fi < g.nx) & (fj >= 0) & (fj < g.nxi)
    padded = np.pad(moved.raster, 1, constant_values=False)
    hit = np.zeros(ii.size, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            a = np.clip(fi + di + 1, 0, g.nx + 1)
            b = np.clip(fj + dj + 1, 0, g.nxi + 1)
            hit |= padded[a, b]
    n = int(ok_grid.sum())
    if n == 0:
        return 1.0, 0
    return float(np.mean(hit[ok_grid])), n


def homogeneity_check(h: HamiltonianSpec, samples: int = 1000, seed: int = 0):
    """Max relative deviation of ``a_0(lam x, lam^sigma xi) = lam^{1+sigma} a_0(x, xi)``.

    Returns ``(deviation, (rho_lo, rho_hi), nonempty)``.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, samples)
    xi = rng.uniform(-3, 3, samples)
    lam = np.exp(rng.uniform(np.log(0.1), np.log(10.0), samples))
    pc = float(h.p_c)
    sig = float(h.sigma)

    def a0(u, v):
        return (u ** (2 * h.k) + v ** (2 * h.m)) ** pc

    lhs = a0(lam * x, lam ** sig * xi)
    rhs = lam ** (1 + sig) * a0(x, xi)
    dev = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    lo, hi = h.rho_interval()
    return dev, (lo, hi), lo <= hi


def conic_commutation_defect(h: HamiltonianSpec, samples: int = 20, seed: int = 0, t: float = 0.7):
    """Max ``|chi_t(dilate(z, lam)) - dilate(chi_t(z), lam)|`` over random samples
    kept away from the excision ball."""
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0, 2 * np.pi, samples)
    r = rng.uniform(1.0, 2.0, samples)
    x, xi = r * np.cos(ang), r * np.sin(ang)
    lam = rng.uniform(1.0, 2.0, samples)
    sig = float(h.sigma)
    a = flow_points(h, lam * x, lam ** sig * xi, t, per_period=2000)
    bx, bxi = flow_points(h, x, xi, t, per_period=2000)
    return float(np.max(np.hypot(a[0] - lam * bx, a[1] - lam ** sig * bxi)))
