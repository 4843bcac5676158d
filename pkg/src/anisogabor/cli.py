"""Command-line front end: ``anisogabor <command> [--config FILE] [--out DIR]``.

Every command writes its data files, ``resolved_config.json`` and
``report.json`` into the output directory.  Exit status is 0 when all checks
pass, 1 when a check fails or a computation errors out, 2 for usage or
configuration errors.
"""

import argparse
import copy
import json
import sys
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, io
from ._accel import set_threads
from .geometry import AnisoParams, PhaseGrid, PhasePoint, RegionMask
from .hamilton import (HamiltonianSpec, exact_rotation_flow, flow_rk4, period, transport_consistency,
                       transport_region)
from .regions import KINDS as REGION_KINDS
from .regions import build_region
from .schrodinger import build_operator, propagate, verify_propagation
from .signal import SpatialGrid, make_catalog_signal
from .singularity import decay_map, filter_axioms_check, filter_membership, wavefront_extract
from .stft import STFTField, Window, analyze, constant_field, delta_field, moyal_error

COMMANDS = ("stft", "decay", "flow", "transport", "evolve", "verify", "figure")
FIGURES = ("fig1a", "fig1b", "fig2a", "fig2b")

DEFAULTS = {
    "signal": {"kind": "gaussian", "width": 1.0},
    "window": {"kind": "gaussian", "order": 0, "scale": 1.0},
    "space": {"x_max": 30.0, "n": 1201},
    "params": {"k": 1, "m": 1, "rho": 1.0},
    "phase_grid": {"x_max": 20.0, "xi_max": 20.0, "nx": 257, "nxi": 257},
    "hamiltonian": {"k": 1, "m": 1, "p": "1", "mu": 0.25},
    "flow": {"start": [1.0, 0.0], "t": None, "dt_max": 0.01, "per_period": 2000},
    "transport": {"t": 1.0, "per_period": 200},
    "times": [0.0, 1.0],
    "t": 1.0,
    "basis_size": 200,
    "regions": [],
    "thresholds": {"n_threshold": 8.0, "n_cap": 12.0, "r_min": 2.0, "eps": 0.1},
}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


REGION_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(REGION_KINDS)},
        "label": {"type": "string"},
        "C": _POS, "sigma": _POS, "a": _NUM, "b": _NUM, "c": _NUM,
        "r_in": _NUM, "r_out": _NUM, "x0": _NUM, "xi0": _NUM, "x": _NUM, "xi": _NUM,
        "parts": {"type": "array", "items": {"$ref": "#/definitions/region"}},
        "part": {"$ref": "#/definitions/region"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "definitions": {"region": REGION_SCHEMA},
    **_obj({
        "signal": _obj({
            "kind": {"enum": ["gaussian", "hermite", "delta_approx", "constant", "chirp", "delta"]},
            "width": _POS, "order": {"type": "integer", "minimum": 0}, "rate": _NUM,
        }, ["kind"]),
        "window": _obj({"kind": {"enum": ["gaussian", "hermite"]},
                        "order": {"type": "integer", "minimum": 0}, "scale": _POS}),
        "space": _obj({"x_max": _POS, "n": {"type": "integer", "minimum": 16}}),
        "params": _obj({"k": _INT, "m": _INT, "rho": _POS}),
        "phase_grid": _obj({"x_max": _POS, "xi_max": _POS, "nx": {"type": "integer", "minimum": 8},
                            "nxi": {"type": "integer", "minimum": 8}}),
        "hamiltonian": _obj({"k": _INT, "m": _INT, "p": {"type": ["string", "number"]}, "mu": _POS}),
        "flow": _obj({"start": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                      "t": {"type": ["number", "null"]}, "dt_max": _POS, "per_period": _INT}),
        "transport": _obj({"t": _NUM, "per_period": _INT}),
        "times": {"type": "array", "items": _NUM, "minItems": 1},
        "t": _NUM,
        "basis_size": {"type": "integer", "minimum": 32},
        "regions": {"type": "array", "items": {"$ref": "#/definitions/region"}},
        "thresholds": _obj({"n_threshold": _POS, "n_cap": _POS, "r_min": _POS, "eps": _POS}),
        "output": {"type": "string"},
    }),
}


class ConfigError(Exception):
    pass


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(raw):
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    if "signal" in raw:  # a new signal kind replaces the default parameters
        cfg["signal"] = dict(raw["signal"])
    return cfg


def load_config(path):
    if path is None:
        return resolve_config({})
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return resolve_config(raw)


# -- builders ---------------------------------------------------------------


def _space(cfg):
    s = cfg["space"]
    return SpatialGrid(float(s["x_max"]), int(s["n"]))


def _phase_grid(cfg):
    g = cfg["phase_grid"]
    return PhaseGrid(float(g["x_max"]), float(g["xi_max"]), int(g["nx"]), int(g["nxi"]))


def _window(cfg):
    w = cfg["window"]
    return Window(w["kind"], int(w["order"]), float(w["scale"]), grid=_space(cfg))


def _params(cfg):
    p = cfg["params"]
    return AnisoParams(int(p["k"]), int(p["m"]), float(p["rho"]))


def _hamiltonian(cfg):
    h = cfg["hamiltonian"]
    return HamiltonianSpec(int(h["k"]), int(h["m"]), Fraction(str(h["p"])), float(h["mu"]))


def _signal(cfg):
    s = dict(cfg["signal"])
    kind = s.pop("kind")
    if kind == "delta":
        raise ConfigError("signal kind 'delta' is only available through the exact stft/decay path")
    return make_catalog_signal(kind, _space(cfg), **s)


def _field(cfg):
    kind = cfg["signal"]["kind"]
    w, g = _window(cfg), _phase_grid(cfg)
    if kind == "delta":
        return delta_field(w, g), None
    if kind == "constant":
        return constant_field(w, g), None
    u = _signal(cfg)
    return analyze(u, w, g), u


def _regions(cfg, grid):
    return [build_region(spec, grid) for spec in cfg["regions"]]


def _gp_image(data, column, title):
    return ("set datafile separator ','\nset view map\nset size ratio -1\n"
            f"set title '{title}'\nset xlabel 'x'\nset ylabel 'xi'\n"
            f"plot '{data}' using 1:2:{column} with image notitle\n")


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


# -- commands ---------------------------------------------------------------


def cmd_stft(cfg, out):
    F, u = _field(cfg)
    io.write_field_csv(out / "field.csv", F)
    io.write_field_binary(out / "field.bin", F)
    _write_text(out / "stft.gp", _gp_image("field.csv", 5, f"|V u|, u = {F.source_label}"))
    checks = {}
    if cfg["signal"]["kind"] == "delta":
        X, _ = F.grid.mesh()
        dev = float(np.max(np.abs(F.abs - np.abs(F.window(-X)) / np.sqrt(2 * np.pi))))
        checks["delta_closed_form"] = {"deviation": dev, "pass": dev < 1e-10}
    elif u is not None:
        err = moyal_error(u, F.window, F.grid)
        checks["inversion"] = {"relative_error": err, "pass": err < 1e-6}
    return checks


def cmd_decay(cfg, out):
    F, _ = _field(cfg)
    p = _params(cfg)
    th = cfg["thresholds"]
    dm = decay_map(F, p, n_cap=th["n_cap"], r_min=th["r_min"])
    io.write_decay_csv(out / "decay.csv", dm)
    _write_text(out / "decay.gp", _gp_image("decay.csv", 3, f"decay exponent, {F.source_label}"))
    wf = wavefront_extract(F, p, th["n_threshold"], n_cap=th["n_cap"], r_min=th["r_min"])
    io.write_json(out / "wavefront.json", {"angles_deg": [float(np.degrees(a)) for a in wf],
                                           "n_threshold": th["n_threshold"]})
    checks = {}
    regions = _regions(cfg, F.grid)
    reports = [filter_membership(F, p, r, th["eps"], th["n_threshold"], th["n_cap"], th["r_min"]).to_dict()
               for r in regions]
    io.write_json(out / "filters.json", reports)
    if len(regions) >= 2:
        ok = filter_axioms_check(F, p, regions, th["eps"], th["n_threshold"], n_cap=th["n_cap"],
                                 r_min=th["r_min"])
        checks["filter_axioms"] = {"pass": bool(ok)}
    return checks


def cmd_flow(cfg, out):
    h = _hamiltonian(cfg)
    f = cfg["flow"]
    z = PhasePoint(float(f["start"][0]), float(f["start"][1]))
    T = period(h, z)
    t = T if f["t"] is None else float(f["t"])
    tr = flow_rk4(h, z, t, float(f["dt_max"]), int(f["per_period"]))
    io.write_trajectory_csv(out / "trajectory.csv", tr)
    _write_text(out / "flow.gp", "set datafile separator ','\nset size ratio -1\n"
                "plot 'trajectory.csv' using 2:3 with lines title 'chi_t(z)'\n")
    checks = {"energy_drift": {"drift": tr.drift, "pass": tr.drift < 1e-8}, "period": T}
    if f["t"] is None:
        err = float(np.hypot(tr.x[-1] - z.x, tr.xi[-1] - z.xi) / np.hypot(z.x, z.xi))
        checks["return"] = {"relative_error": err, "pass": err < 1e-6}
    return checks


def cmd_transport(cfg, out):
    h = _hamiltonian(cfg)
    g = _phase_grid(cfg)
    tcfg = cfg["transport"]
    t, per = float(tcfg["t"]), int(tcfg["per_period"])
    checks = {}
    regions = _regions(cfg, g)
    if not regions:
        raise ConfigError("transport needs at least one region")
    for i, r in enumerate(regions):
        moved = transport_region(h, r, t, per)
        io.write_region_csv(out / f"region_{i:02d}.csv", r)
        io.write_region_csv(out / f"transported_{i:02d}.csv", moved)
        frac, n = transport_consistency(h, r, moved, t, per)
        checks[f"consistency_{i:02d}"] = {"region": r.label, "fraction": frac, "samples": n,
                                          "pass": frac >= 0.99}
    _write_text(out / "transport.gp", _gp_image("transported_00.csv", 3, f"chi_{t:g}(region)"))
    return checks


def cmd_evolve(cfg, out):
    h = _hamiltonian(cfg)
    u0 = _signal(cfg)
    basis = build_operator(h.k, h.m, int(cfg["basis_size"]))
    io.save_basis(out / "basis.bin", basis)
    res = propagate(basis, u0, h.p_exp, cfg["times"])
    io.write_evolution_csv(out / "evolution", res)
    norms = np.linalg.norm(res.coefficients, axis=1)
    dev = float(np.max(np.abs(norms / norms[0] - 1.0)))
    return {"unitarity": {"deviation": dev, "pass": dev < 1e-9},
            "basis": {"size": basis.basis_size, "certified": basis.n_certified}}


def cmd_verify(cfg, out):
    h = _hamiltonian(cfg)
    u0 = _signal(cfg)
    g = _phase_grid(cfg)
    th = cfg["thresholds"]
    basis = build_operator(h.k, h.m, int(cfg["basis_size"]))
    regions = _regions(cfg, g)
    if not regions:
        raise ConfigError("verify needs at least one region")
    rep = verify_propagation(basis, h, u0, float(cfg["t"]), regions, {"grid": g, "window": _window(cfg)},
                             {"eps": th["eps"], "n_threshold": th["n_threshold"], "n_cap": th["n_cap"],
                              "r_min": th["r_min"], "rho0": cfg["params"]["rho"]})
    io.write_json(out / "propagation.json", rep)
    return {"propagation": {"regime": rep["regime"], "pass": rep["pass"]}}


# -- figures ----------------------------------------------------------------

FIG_SPECS = {
    "fig1": {"k": 1, "m": 1, "C": 5.0, "p": Fraction(6, 5), "grid": PhaseGrid(4.0, 4.0, 401, 401)},
    "fig2": {"k": 2, "m": 1, "C": 3.0, "p": Fraction(7, 8), "grid": PhaseGrid(2.0, 4.0, 321, 321)},
}
FIG_MU = 0.25


def figure_region(name):
    spec = FIG_SPECS[name[:4]]
    C, s = spec["C"], spec["k"] / spec["m"]
    return RegionMask(lambda x, xi: C * np.abs(x) ** s <= np.abs(xi), spec["grid"],
                      label=f"Omega_C(C={C:g},sigma={s:g})")


def figure_setup(name):
    spec = FIG_SPECS[name[:4]]
    h = HamiltonianSpec(spec["k"], spec["m"], spec["p"], FIG_MU)
    return h, figure_region(name), float(2 / spec["p"])


def cmd_figure(name, out, per_period=200):
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    h, omega, t = figure_setup(name)
    checks = {"parameters": {"k": h.k, "m": h.m, "p": str(h.p_exp), "C": FIG_SPECS[name[:4]]["C"],
                             "t": t, "mu": h.mu}}
    if name.endswith("a"):
        region = omega
    else:
        region = transport_region(h, omega, t, per_period)
        if name == "fig1b":
            X, XI = omega.grid.mesh()
            bx, bxi = exact_rotation_flow(h, X, XI, -t)
            oracle = np.asarray(omega.predicate(bx, bxi), dtype=bool)
            mism = int(np.sum(oracle != region.raster))
            checks["rotation_oracle"] = {"mismatched_cells": mism, "pass": mism == 0}
        frac, n = transport_consistency(h, omega, region, t, per_period)
        checks["consistency"] = {"fraction": frac, "samples": n, "pass": frac >= 0.99}
    io.write_region_csv(out / f"{name}.csv", region)
    io.write_json(out / f"{name}_region.json", io.region_to_dict(region))
    _write_text(out / f"{name}.gp", _gp_image(f"{name}.csv", 3, region.label))
    return checks


# -- entry point ------------------------------------------------------------


def _all_pass(checks):
    ok = True
    for v in checks.values():
        if isinstance(v, dict) and "pass" in v:
            ok = ok and bool(v["pass"])
    return ok


def build_parser():
    ap = argparse.ArgumentParser(prog="anisogabor", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("figure", nargs="?", help="figure name for the 'figure' command")
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--threads", type=int, default=0, help="worker threads for compiled kernels")
    ap.add_argument("--seed", type=int, default=0, help="seed recorded with the run")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed < 0 or args.seed >= 2 ** 64:
        print("anisogabor: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    set_threads(args.threads)
    out = Path(args.out)
    try:
        if args.command == "figure":
            if not args.figure:
                raise ConfigError("figure needs a name: " + ", ".join(FIGURES))
            cfg = {"figure": args.figure}
        else:
            if args.figure:
                raise ConfigError(f"unexpected argument {args.figure!r}")
            cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"anisogabor {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"anisogabor {args.command}: cannot create {out}: {exc.strerror}", file=sys.stderr)
        return 2
    resolved = dict(cfg, output=str(out), seed=args.seed, threads=args.threads)
    try:
        io.write_json(out / "resolved_config.json", resolved)
        np.random.seed(args.seed % 2 ** 32)
        if args.command == "figure":
            checks = cmd_figure(args.figure, out)
        else:
            checks = globals()[f"cmd_{args.command}"](cfg, out)
    except ConfigError as exc:
        print(f"anisogabor {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"anisogabor {args.command}: {exc}", file=sys.stderr)
        io.write_json(out / "report.json", {"command": args.command, "pass": False, "error": str(exc)})
        return 1
    ok = _all_pass(checks)
    io.write_json(out / "report.json", {"command": args.command, "pass": ok, "checks": checks})
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
