"""Short-time Fourier analysis and synthesis.

Conventions::

    F f(xi)       = (2 pi)^{-1/2} int f(t) e^{-i t xi} dt
    V_phi u(x,xi) = F(u * conj(phi(. - x)))(xi)
    V_phi^* G(t)  = (2 pi)^{-1/2} iint G(x,xi) e^{i t xi} phi(t - x) dx dxi

Sums are trapezoid quadratures on the sample lattice.  Frequency sums are
evaluated at the exact lattice frequencies with Bluestein's chirp-z transform,
which is an FFT-based evaluation and needs no bin interpolation.
"""

from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Callable, Optional

import numpy as np
from scipy.signal import czt

from .geometry import PhaseGrid
from .signal import SampledSignal, SpatialGrid, hermite_function, l2_norm

_NORM = 1.0 / sqrt(2.0 * pi)


@dataclass(frozen=True, eq=False)
class Window:
    """Analysis window given by an analytic function.

    ``kind`` is ``"gaussian"`` or ``"hermite"``; ``order`` applies to the
    latter.  ``scale`` and ``phase`` record a dilation ``|A|^{1/2} phi(A x)``
    and a constant unimodular factor, so Fourier images and dilates of catalog
    windows stay analytic.
    """

    kind: str = "gaussian"
    order: int = 0
    scale: float = 1.0
    phase: complex = 1.0 + 0j
    grid: SpatialGrid = field(default_factory=SpatialGrid)

    def __post_init__(self):
        if self.kind not in ("gaussian", "hermite"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.scale == 0:
            raise ValueError("window scale must be nonzero")

    def __call__(self, x):
        a = self.scale
        n = self.order if self.kind == "hermite" else 0
        return self.phase * sqrt(abs(a)) * hermite_function(n, a * np.asarray(x, dtype=float))

    @property
    def samples(self) -> SampledSignal:
        return SampledSignal(self(self.grid.xs), self.grid.x_max, self.label, func=self)

    @property
    def l2_norm(self) -> float:
        return l2_norm(self.samples)

    @property
    def label(self):
        base = "gaussian" if self.kind == "gaussian" else f"hermite({self.order})"
        return base if self.scale == 1 else f"{base}@{self.scale:g}"

    def dilate(self, a: float) -> "Window":
        return Window(self.kind, self.order, self.scale * a, self.phase, self.grid)

    def fourier(self) -> "Window":
        """Fourier image; Hermite functions are eigenfunctions with eigenvalue (-i)^n."""
        n = self.order if self.kind == "hermite" else 0
        return Window(self.kind, self.order, 1.0 / self.scale, self.phase * (-1j) ** n, self.grid)

    def conj_reflect_at_zero(self, x):
        """``conj(phi(-x))``."""
        return np.conj(self(-np.asarray(x, dtype=float)))


@dataclass(frozen=True, eq=False)
class STFTField:
    values: np.ndarray
    grid: PhaseGrid
    window: Window
    source_label: str = ""
    space: Optional[SpatialGrid] = None
    exact: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.nx, self.grid.nxi):
            raise ValueError("field shape does not match its phase grid")
        object.__setattr__(self, "values", v)

    @property
    def abs(self):
        return np.abs(self.values)


def _freq_sum(samples, t0, h, xi0, hxi, nxi):
    """``sum_n samples[..., n] exp(-i t_n xi_j)`` for ``t_n = t0 + n h`` and
    ``xi_j = xi0 + j hxi``, along the last axis."""
    # exp(-i t_n xi_j) = exp(-i t0 xi_j) exp(-i n h xi0) exp(-i n j h hxi)
    n = samples.shape[-1]
    pre = np.exp(-1j * h * xi0 * np.arange(n))
    out = czt(samples * pre, m=nxi, w=np.exp(-1j * h * hxi), a=1.0, axis=-1)
    xis = xi0 + hxi * np.arange(nxi)
    return out * np.exp(-1j * t0 * xis)


def analyze(u: SampledSignal, w: Window, grid: PhaseGrid = PhaseGrid(), block: int = 64) -> STFTField:
    """STFT of ``u`` with window ``w`` on the lattice of ``grid``."""
    if w.grid.n != u.n or w.grid.x_max != u.x_max:
        raise ValueError("signal and window are sampled on different grids")
    t = u.xs
    out = np.empty((grid.nx, grid.nxi), dtype=complex)
    xs = grid.xs
    for s in range(0, grid.nx, block):
        xb = xs[s:s + block, None]
        prod = u.values[None, :] * np.conj(w(t[None, :] - xb))
        out[s:s + block] = _freq_sum(prod, -u.x_max, u.h, -grid.xi_max, grid.hxi, grid.nxi)
    out *= _NORM * u.h
    return STFTField(out, grid, w, u.label, u.grid)


def synthesize(F: STFTField, w: Window, space: Optional[SpatialGrid] = None, block: int = 64) -> SampledSignal:
    """Adjoint STFT ``(2 pi)^{-1/2} iint F(z) M_xi T_x phi dz`` by quadrature."""
    space = space or F.space or w.grid
    g = F.grid
    t = space.xs
    acc = np.zeros(space.n, dtype=complex)
    if np.any(F.values):
        # inner sum over xi: sum_j F_ij exp(+i t_n xi_j), evaluated at all t_n
        for s in range(0, g.nx, block):
            rows = np.conj(F.values[s:s + block])
            inner_sum = np.conj(_freq_sum(rows, -g.xi_max, g.hxi, -space.x_max, space.h, space.n))
            phi = w(t[None, :] - g.xs[s:s + block, None])
            acc += np.sum(inner_sum * phi, axis=0)
    acc *= _NORM * g.hx * g.hxi
    return SampledSignal(acc, space.x_max, f"synth[{F.source_label}]")


def fourier(u: SampledSignal) -> SampledSignal:
    """Fourier transform sampled on the same lattice, read as frequencies."""
    vals = _freq_sum(u.values[None, :], -u.x_max, u.h, -u.x_max, u.h, u.n)[0]
    vals = vals * _NORM * u.h
    return SampledSignal(vals, u.x_max, f"F[{u.label}]")


def delta_field(w: Window, grid: PhaseGrid = PhaseGrid()) -> STFTField:
    """Exact STFT of the Dirac mass at the origin: ``(2 pi)^{-1/2} conj(phi(-x))``."""
    def exact(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return _NORM * w.conj_reflect_at_zero(x) + 0 * xi

    X, XI = grid.mesh()
    return STFTField(exact(X, XI), grid, w, "delta_0", exact=exact)


def constant_field(w: Window, grid: PhaseGrid = PhaseGrid()) -> STFTField:
    """Exact STFT of the constant 1: ``e^{-i x xi} conj(F phi(-xi))``."""
    fw = w.fourier()

    def exact(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return np.exp(-1j * x * xi) * np.conj(fw(-xi))

    X, XI = grid.mesh()
    return STFTField(exact(X, XI), grid, w, "constant", exact=exact)


def moyal_error(u: SampledSignal, w: Window, grid: PhaseGrid = PhaseGrid()) -> float:
    """Relative L2 error of ``V^* V u / ||phi||^2`` against ``u``."""
    F = analyze(u, w, grid)
    back = synthesize(F, w, u.grid)
    nw2 = w.l2_norm ** 2
    diff = back.values / nw2 - u.values
    return float(np.linalg.norm(diff) / np.linalg.norm(u.values))


def _resample(u: SampledSignal, func, label):
    return SampledSignal(func(u.xs), u.x_max, label, func=func)


def metaplectic_check(u: SampledSignal, w: Window, op="fourier", grid: PhaseGrid = PhaseGrid()) -> float:
    """Max deviation ``| |V_{mu phi}(mu u)(chi z)| - |V_phi u(z)| |`` over the grid.

    ``op`` is ``"fourier"`` or ``("dilation", A)``.  For the Fourier case the
    grid must be square so that ``J z = (xi, -x)`` maps the lattice to itself;
    for a dilation the left side is evaluated on the rescaled lattice.
    """
    base = analyze(u, w, grid).abs
    if op == "fourier":
        if grid.nx != grid.nxi or grid.x_max != grid.xi_max:
            raise ValueError("fourier check needs a square phase grid")
        fu = fourier(u)
        lhs = analyze(fu, w.fourier(), grid).abs
        # lhs[a, b] sits at (x_a, xi_b); J z for z = (x_i, xi_j) is (xi_j, -x_i)
        lhs_at_jz = lhs.T[:, ::-1]
        return float(np.max(np.abs(lhs_at_jz - base)))
    kind, a = op
    if kind != "dilation":
        raise ValueError(f"unknown metaplectic operator {op!r}")
    a = float(a)
    if a == 0:
        raise ValueError("dilation factor must be nonzero")
    if u.func is None:
        raise ValueError("dilation check needs an analytic signal")
    f = u.func
    mu_u = _resample(u, lambda x: sqrt(abs(a)) * f(a * np.asarray(x)), f"dil[{u.label}]")
    scaled = PhaseGrid(grid.x_max / abs(a), grid.xi_max * abs(a), grid.nx, grid.nxi)
    lhs = analyze(mu_u, w.dilate(a), scaled).abs
    if a < 0:
        # chi_A reverses both axes when A < 0
        lhs = lhs[::-1, ::-1]
    return float(np.max(np.abs(lhs - base)))
