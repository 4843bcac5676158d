"""Closed catalog of analytic phase-space regions, built from JSON-style specs.

Examples::

    {"kind": "freq_cone", "C": 5}                 # C |x|^sigma <= |xi|
    {"kind": "pos_cone", "C": 2, "sigma": 2}      # C |xi|^(1/sigma) <= |x|
    {"kind": "half_plane", "a": 1, "b": 0, "c": 2}
    {"kind": "annulus", "r_in": 4, "r_out": 12}
    {"kind": "box", "x0": 0, "xi0": 0, "a": 1, "b": 1}
    {"kind": "union", "parts": [...]}             # also "intersection"
    {"kind": "complement", "part": {...}}
    {"kind": "point", "x": 1, "xi": 0}
"""

from typing import Callable, Dict

import numpy as np

from .geometry import PhaseGrid, RegionMask

KINDS = ("freq_cone", "pos_cone", "half_plane", "annulus", "box", "union", "intersection",
         "complement", "point")


def _freq_cone(spec):
    C = float(spec.get("C", 1.0))
    s = float(spec.get("sigma", 1.0))
    return lambda x, xi: C * np.abs(x) ** s <= np.abs(xi), f"freq_cone(C={C:g},sigma={s:g})"


def _pos_cone(spec):
    C = float(spec.get("C", 1.0))
    s = float(spec.get("sigma", 1.0))
    return lambda x, xi: C * np.abs(xi) ** (1.0 / s) <= np.abs(x), f"pos_cone(C={C:g},sigma={s:g})"


def _half_plane(spec):
    a, b, c = (float(spec.get(k, d)) for k, d in (("a", 1.0), ("b", 0.0), ("c", 0.0)))
    return lambda x, xi: a * x + b * xi >= c, f"half_plane({a:g},{b:g},{c:g})"


def _annulus(spec):
    r0 = float(spec.get("r_in", 0.0))
    r1 = float(spec.get("r_out", np.inf))
    if r1 < r0:
        raise ValueError("annulus needs r_in <= r_out")

    def pred(x, xi):
        r = np.hypot(x, xi)
        return (r >= r0) & (r <= r1)

    return pred, f"annulus({r0:g},{r1:g})"


def _box(spec):
    x0, xi0 = float(spec.get("x0", 0.0)), float(spec.get("xi0", 0.0))
    a, b = float(spec.get("a", 1.0)), float(spec.get("b", 1.0))
    return (lambda x, xi: (np.abs(x - x0) <= a) & (np.abs(xi - xi0) <= b),
            f"box({x0:g},{xi0:g};{a:g},{b:g})")


def predicate(spec: Dict):
    """``(predicate, label)`` for a region spec."""
    kind = spec.get("kind")
    simple: Dict[str, Callable] = {
        "freq_cone": _freq_cone, "pos_cone": _pos_cone, "half_plane": _half_plane,
        "annulus": _annulus, "box": _box,
    }
    if kind in simple:
        pred, label = simple[kind](spec)
    elif kind in ("union", "intersection"):
        parts = [predicate(p) for p in spec.get("parts", [])]
        if not parts:
            raise ValueError(f"{kind} needs at least one part")
        op = np.logical_or if kind == "union" else np.logical_and

        def pred(x, xi, parts=parts, op=op):
            out = np.asarray(parts[0][0](x, xi), dtype=bool)
            for p, _ in parts[1:]:
                out = op(out, p(x, xi))
            return out

        label = f"{kind}(" + ",".join(lbl for _, lbl in parts) + ")"
    elif kind == "complement":
        inner, lbl = predicate(spec["part"])

        def pred(x, xi, inner=inner):
            return ~np.asarray(inner(x, xi), dtype=bool)

        label = f"not({lbl})"
    else:
        raise ValueError(f"unknown region kind {kind!r}")
    return pred, spec.get("label", label)


def build_region(spec: Dict, grid: PhaseGrid) -> RegionMask:
    if spec.get("kind") == "point":
        return RegionMask.lattice_point(grid, float(spec["x"]), float(spec["xi"]), spec.get("label", ""))
    pred, label = predicate(spec)
    return RegionMask(pred, grid, label=label)
