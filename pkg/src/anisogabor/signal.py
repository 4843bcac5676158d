"""Catalog of sampled test distributions on a uniform 1D grid."""

from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import erfc

TRUNCATION_TOL = 1e-10


@dataclass(frozen=True)
class SpatialGrid:
    x_max: float = 30.0
    n: int = 1201

    def __post_init__(self):
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")
        if self.n < 16:
            raise ValueError("need at least 16 samples")

    @property
    def h(self):
        return 2.0 * self.x_max / (self.n - 1)

    @property
    def xs(self):
        return np.linspace(-self.x_max, self.x_max, self.n)

    def to_dict(self):
        return {"x_max": self.x_max, "n": self.n}


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Complex samples on ``linspace(-x_max, x_max, n)``.

    ``func`` optionally keeps the analytic expression the samples came from,
    which lets transforms resample exactly instead of interpolating.
    """

    values: np.ndarray
    x_max: float
    label: str = ""
    func: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 16:
            raise ValueError("signal needs at least 16 samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.size

    @property
    def h(self):
        return 2.0 * self.x_max / (self.n - 1)

    @property
    def grid(self):
        return SpatialGrid(self.x_max, self.n)

    @property
    def xs(self):
        return np.linspace(-self.x_max, self.x_max, self.n)

    def evaluate(self, x):
        """Values at arbitrary points (analytic if known, else linear interpolation)."""
        x = np.asarray(x, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(x), dtype=complex)
        re = np.interp(x, self.xs, self.values.real, left=0.0, right=0.0)
        im = np.interp(x, self.xs, self.values.imag, left=0.0, right=0.0)
        return re + 1j * im

    def __sub__(self, other):
        return SampledSignal(self.values - other.values, self.x_max, f"{self.label}-{other.label}")


def l2_norm(u: SampledSignal) -> float:
    return float(np.sqrt(u.h * np.sum(np.abs(u.values) ** 2)))


def inner(u: SampledSignal, v: SampledSignal) -> complex:
    """``(u, v)``, linear in ``u``."""
    return complex(u.h * np.sum(u.values * np.conj(v.values)))


def hermite_function(n: int, x):
    """L2-normalized Hermite function via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    h_prev = np.zeros_like(x)
    h = pi ** -0.25 * np.exp(-0.5 * x * x)
    for j in range(n):
        h_prev, h = h, sqrt(2.0 / (j + 1)) * x * h - sqrt(j / (j + 1)) * h_prev
    return h


def _tail_fraction(func, x_max, scale):
    # mass outside [-x_max, x_max] relative to the total, on a wide fine grid
    span = max(3.0 * x_max, x_max + 20.0 * scale)
    t = np.linspace(-span, span, 40001)
    d = np.abs(func(t)) ** 2
    outside = np.where(np.abs(t) > x_max, d, 0.0)
    return trapezoid(outside, t) / trapezoid(d, t)


def _make(func, grid, label, check=None):
    if check is not None and check > TRUNCATION_TOL:
        raise ValueError(f"grid truncation: {check:.3e} of the mass lies outside the grid")
    return SampledSignal(func(grid.xs), grid.x_max, label, func=func)


def gaussian(width: float = 1.0, grid: SpatialGrid = SpatialGrid()):
    """``pi^{-1/4} w^{-1/2} exp(-x^2 / (2 w^2))``."""
    w = float(width)
    c = pi ** -0.25 / sqrt(w)

    def f(x):
        return c * np.exp(-0.5 * (np.asarray(x) / w) ** 2) + 0j

    return _make(f, grid, f"gaussian({w:g})", erfc(grid.x_max / w))


def hermite(order: int, grid: SpatialGrid = SpatialGrid()):
    n = int(order)

    def f(x):
        return hermite_function(n, x) + 0j

    tail = _tail_fraction(f, grid.x_max, sqrt(2 * n + 1))
    return _make(f, grid, f"hermite({n})", tail)


def delta_approx(width: float, grid: SpatialGrid = SpatialGrid()):
    """L1-normalized Gaussian of standard deviation ``width``.

    The grid spacing should be well below ``width``; no truncation check is
    applied beyond that.
    """
    w = float(width)
    if grid.h > 0.5 * w:
        raise ValueError("grid truncation: spacing too coarse for the requested width")

    def f(x):
        return np.exp(-0.5 * (np.asarray(x) / w) ** 2) / (w * sqrt(2 * pi)) + 0j

    return _make(f, grid, f"delta_approx({w:g})")


def constant(grid: SpatialGrid = SpatialGrid()):
    """The constant 1 restricted to the grid."""

    def f(x):
        return np.ones_like(np.asarray(x, dtype=float)) + 0j

    return _make(f, grid, "constant")


def chirp(rate: float = 1.0, grid: SpatialGrid = SpatialGrid(), width: float = 1.0):
    """Gaussian envelope times ``exp(i rate x^2 / 2)``."""
    a = float(rate)
    w = float(width)
    c = pi ** -0.25 / sqrt(w)

    def f(x):
        x = np.asarray(x)
        return c * np.exp(-0.5 * (x / w) ** 2 + 0.5j * a * x * x)

    return _make(f, grid, f"chirp({a:g})", erfc(grid.x_max / w))


def indicator_synth(region, window, grid: SpatialGrid = SpatialGrid()):
    """Synthesize the indicator of ``region`` (a RegionMask) with ``window``."""
    from .stft import STFTField, synthesize

    fld = STFTField(region.raster.astype(complex), region.grid, window, f"chi[{region.label}]", grid)
    u = synthesize(fld, window, grid)
    return SampledSignal(u.values, grid.x_max, f"indicator_synth({region.label})")


_KINDS = {
    "gaussian": gaussian,
    "hermite": hermite,
    "delta_approx": delta_approx,
    "constant": constant,
    "chirp": chirp,
    "indicator_synth": indicator_synth,
}


def make_catalog_signal(kind: str, grid: SpatialGrid = SpatialGrid(), **params):
    """Build a catalog signal by name, e.g. ``make_catalog_signal("hermite", order=3)``."""
    try:
        ctor = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown signal kind {kind!r}") from None
    return ctor(grid=grid, **params)
