"""Compare the compiled and numpy paths of each hot kernel.

    python3 benchmarks/bench_kernels.py [--repeat 2] [--json out.json]

Both paths are called explicitly through ``backend=``; the compiled path is
warmed up once; the "first" column includes compilation (or a cache load).
"""

import argparse
import json
import time
import timeit
from fractions import Fraction

import numpy as np

from anisogabor._accel import use_numba
from anisogabor.geometry import paint_boxes
from anisogabor.hamilton import HamiltonianSpec, flow_points
from anisogabor.singularity import ladder_exponents
from anisogabor.symbols import mollify_raster


def cases(rng):
    n = 513
    pts = 400
    ii, jj = rng.integers(0, n, (2, pts))
    ra, rb = rng.integers(1, 40, (2, pts))
    yield "paint_boxes 513^2, 400 boxes", lambda b: paint_boxes(ii, jj, ra, rb, n, n, backend=b)

    rays, levels = 720, 24
    logt = np.log(2.0 * 2 ** (np.arange(levels) / 4))[None, :]
    logv = -rng.uniform(0, 14, (rays, 1)) * logt + rng.normal(scale=0.05, size=(rays, levels))
    valid = rng.uniform(size=(rays, levels)) > 0.05
    yield "ladder_exponents 720 rays", lambda b: ladder_exponents(logv, logt, valid, -700.0, 12.0, backend=b)

    S = np.zeros((257, 257), dtype=bool)
    S[100:160, 90:170] = True
    ax = np.full(S.shape, 0.15)
    yield "mollify_raster 257^2", lambda b: mollify_raster(S, 0.0125, 0.0125, ax, ax, backend=b)

    h = HamiltonianSpec(1, 1, Fraction(6, 5))
    x, xi = rng.uniform(-4, 4, (2, 2000))
    yield "flow_points 2000 pts", lambda b: flow_points(h, x, xi, 1.5, per_period=200, backend=b)

    # transport-sized batches: whole rasters, as in figure and propagation runs
    X, XI = np.meshgrid(np.linspace(-20, 20, 257), np.linspace(-20, 20, 257), indexing="ij")
    yield "flow_points 257^2, k=m=1", lambda b: flow_points(h, X, XI, -2 / 1.2, per_period=200, backend=b)
    h2 = HamiltonianSpec(2, 1, Fraction(7, 8))
    X2, XI2 = np.meshgrid(np.linspace(-2, 2, 321), np.linspace(-4, 4, 321), indexing="ij")
    yield "flow_points 321^2, k=2 m=1", lambda b: flow_points(h2, X2, XI2, -16 / 7, per_period=200, backend=b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2)
    ap.add_argument("--json")
    args = ap.parse_args()
    if not use_numba():
        raise SystemExit("numba is disabled; unset ANISOGABOR_NO_NUMBA to compare both paths")
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':30s} {'first s':>8s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, fn in cases(rng):
        t0 = time.perf_counter()
        fn("numba")
        first = time.perf_counter() - t0
        tn = min(timeit.repeat(lambda: fn("numba"), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn("numpy"), number=1, repeat=args.repeat))
        rows.append({"kernel": name, "first_call": first, "numba": tn, "numpy": tp, "speedup": tp / tn})
        print(f"{name:30s} {first:8.3f} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
