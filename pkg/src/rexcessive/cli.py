"""Command-line front end.

Exit status: 0 conclusive, 1 configuration error, 2 inconclusive diagnostics,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .boundary import classify_boundary
from .config import RunConfig, config_from_dict, load_config, parse_rates
from .diffusion import derive_scale_speed
from .exceptions import ConfigError, InconclusiveError, QuadratureError, SimulationError, SolverError
from .excessive import DECREASING, INCREASING, make_tabulation, solve_excessive
from .martingale import Verdict, full_report
from .montecarlo import (SimulationConfig, deficit_curve, ratio_identity_check, scale_gap,
                         tabulated_scale)

EXIT_OK, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_NUMERIC = 0, 1, 2, 3


# -- JSON ------------------------------------------------------------------

def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def render_json(doc):
    return json.dumps(jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- config ----------------------------------------------------------------

def _parse_param(text):
    if "=" not in text:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise ConfigError(f"--param {k}: {v!r} is not a number") from None


def _run_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        if args.family:
            diff = {"family": args.family, "params": dict(_parse_param(p) for p in args.param or [])}
        elif args.drift is not None or args.volatility is not None:
            custom = {"drift": args.drift, "volatility": args.volatility,
                      "interval": args.interval, "reference_point": args.reference_point}
            diff = {"custom": {k: v for k, v in custom.items() if v is not None}}
        else:
            raise ConfigError("no diffusion given: use --config, --family or --drift/--volatility")
        cfg = config_from_dict({"diffusion": diff})
    if getattr(args, "rates", None):
        cfg.rates = parse_rates(args.rates)
    return cfg


# -- subcommands -----------------------------------------------------------

def cmd_classify(args, cfg, out):
    ss = derive_scale_speed(cfg.diffusion)
    doc = {"diffusion": _describe(cfg), "boundaries": {}}
    for side in ("alpha", "beta"):
        bc = classify_boundary(ss, side)
        doc["boundaries"][side] = {"kind": bc.kind.value, "I_access": bc.test_values[0],
                                   "I_nature": bc.test_values[1]}
    if args.json:
        out.write(render_json(doc))
    else:
        out.write(f"{_title(cfg)}\n")
        for side, b in doc["boundaries"].items():
            out.write(f"  {side:5s}  {b['kind']:22s}  I_access={_fmt(b['I_access'])}  "
                      f"I_nature={_fmt(b['I_nature'])}\n")
    return EXIT_OK


def cmd_solve(args, cfg, out):
    ss = derive_scale_speed(cfg.diffusion)
    r = args.r if args.r is not None else cfg.rates[0]
    direction = INCREASING if args.direction in ("increasing", "psi") else DECREASING
    f = solve_excessive(ss, r, direction, make_tabulation(ss, [r]))
    p = f.scale
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.log_space:
        w.writerow(["x", "p(x)", "log_value", "log_abs_dvalue_dp"])
        rows = zip(f.grid, p, f.log_values, f.log_abs_scale_derivative)
    else:
        w.writerow(["x", "p(x)", "value", "dvalue_dp"])
        rows = zip(f.grid, p, f.values, f.scale_derivative)
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    summary = {"diffusion": _describe(cfg), "rate": float(r), "direction": direction,
               "n_nodes": len(f.grid), "grid_hull": [f.grid[0], f.grid[-1]],
               "normalization_point": f.normalization_point, "csv": args.out}
    if args.json:
        out.write(render_json(summary))
    elif not args.out:
        out.write(text)
    else:
        out.write(f"{_title(cfg)}: {direction} solution at r={r:g}, {len(f.grid)} nodes -> {args.out}\n")
    return EXIT_OK


def _report(cfg, strict=True):
    return full_report(cfg.diffusion, list(cfg.rates), strict=strict)


def cmd_table(args, cfg, out):
    rep = _report(cfg, strict=False)
    doc = {"diffusion": _describe(cfg), **rep.as_dict()}
    if args.json:
        out.write(render_json(doc))
    else:
        out.write(_render_table(rep, cfg))
    return _table_status(rep)


def _table_status(rep):
    for s in rep.sides.values():
        if s.concordant is False:
            return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_verdict(args, cfg, out):
    rep = _report(cfg, strict=True)
    doc = {"diffusion": _describe(cfg),
           "verdicts": {s.verdict.process: s.verdict.verdict.value for s in rep.sides.values()},
           "boundaries": {k: s.boundary.kind.value for k, s in rep.sides.items()},
           "kotani": rep.kotani.as_dict()}
    if args.json:
        out.write(render_json(doc))
    else:
        out.write(f"{_title(cfg)}\n")
        for k, s in rep.sides.items():
            out.write(f"  {s.verdict.process:15s} {s.verdict.verdict.value:22s} ({k} {s.boundary.kind.value})\n")
        out.write(f"  {'scale_process':15s} {rep.kotani.verdict.value}\n")
    return EXIT_OK


def _sim(args, cfg, default_x0):
    s = cfg.simulation
    x0 = args.x0 if getattr(args, "x0", None) is not None else (s.x0 if s.x0 is not None else default_x0)
    return SimulationConfig(
        initial_state=x0,
        horizon=args.t if getattr(args, "t", None) is not None else s.horizon,
        step=args.dt if getattr(args, "dt", None) is not None else s.step,
        paths=args.paths if getattr(args, "paths", None) is not None else s.paths,
        seed=args.seed if getattr(args, "seed", None) is not None else s.seed,
    )


def _mc_label(est, expected):
    if est.mean > est.half_width:
        label = "strict-consistent"
    elif est.mean >= -est.half_width:
        label = "martingale-consistent"
    else:
        label = "inconclusive"
    agrees = None
    if label != "inconclusive" and expected is not None:
        agrees = (label == "strict-consistent") == (expected == Verdict.STRICT)
    return label, agrees


def verification(cfg, sim, side, r, s=None, times=None, ratio_horizon=20.0, ratio_step=1e-2):
    ss = derive_scale_speed(cfg.diffusion)
    direction = INCREASING if side == "beta" else DECREASING
    rates = [r] + ([s] if s is not None else [])
    tab = make_tabulation(ss, rates)
    f = solve_excessive(ss, r, direction, tab)
    bc = classify_boundary(ss, side, tabulation=tab)
    from .martingale import verdict_from_boundary
    expected = verdict_from_boundary(bc, side).verdict
    times = [sim.horizon] if times is None else times
    t_rec, ests = deficit_curve(cfg.diffusion, r, f, sim, times)
    est = ests[-1]
    label, agrees = _mc_label(est, expected)
    doc = {"side": side, "rate": r, "x0": sim.initial_state, "t": sim.horizon, "dt": sim.step,
           "paths": sim.paths, "seed": sim.seed, "confidence": sim.confidence,
           "deficit": est.as_dict(), "mc_verdict": label, "expected": expected.value,
           "agrees": agrees,
           "curve": [{"t": float(t), **e.as_dict()} for t, e in zip(t_rec, ests)]}
    if s is not None:
        f_s = solve_excessive(ss, s, direction, tab)
        rcfg = sim.replace(horizon=max(ratio_horizon, sim.horizon), step=ratio_step)
        res = ratio_identity_check(cfg.diffusion, r, s, sim.initial_state, rcfg, side=side,
                                   f_r=f, f_s=f_s)
        doc["ratio_identity"] = {"s": s, "lhs": res.lhs, "rhs": res.rhs.as_dict(),
                                 "z": res.z, "truncation_bound": res.truncation_bound,
                                 "within_4_half_widths": bool(abs(res.z) <= 4)}
    return doc


def cmd_verify(args, cfg, out):
    ss = derive_scale_speed(cfg.diffusion)
    sim = _sim(args, cfg, ss.reference_point)
    r = args.r if args.r is not None else cfg.rates[0]
    times = None
    if args.csv:
        times = [sim.horizon * k / 8 for k in range(1, 9)]
    doc = verification(cfg, sim, args.side, r, args.s, times)
    doc = {"diffusion": _describe(cfg), **doc}
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "deficit", "half_width", "n_effective"])
            for row in doc["curve"]:
                w.writerow([repr(row["t"]), repr(row["mean"]), repr(row["half_width"]), row["n_effective"]])
    if args.json:
        out.write(render_json(doc))
    else:
        d = doc["deficit"]
        out.write(f"{_title(cfg)}: {doc['side']} side, r={r:g}, x0={sim.initial_state:g}, t={sim.horizon:g}\n")
        out.write(f"  deficit {d['mean']:.6g} +/- {d['half_width']:.3g} "
                  f"({int(sim.confidence * 100)}% CI, {d['n_effective']} paths)\n")
        out.write(f"  Monte Carlo: {doc['mc_verdict']}; boundary verdict: {doc['expected']}\n")
        if "ratio_identity" in doc:
            ri = doc["ratio_identity"]
            out.write(f"  ratio identity: lhs {ri['lhs']:.6g}, rhs {ri['rhs']['mean']:.6g} "
                      f"+/- {ri['rhs']['half_width']:.3g}\n")
    return EXIT_INCONCLUSIVE if doc["mc_verdict"] == "inconclusive" else EXIT_OK


def cmd_report(args, cfg, out):
    rep = _report(cfg, strict=True)
    ss = derive_scale_speed(cfg.diffusion)
    sim = _sim(args, cfg, ss.reference_point)
    r = cfg.rates[0]
    mc = {}
    for side in ("alpha", "beta"):
        mc[side] = verification(cfg, sim, side, r)
    gap = scale_gap(cfg.diffusion, sim, tabulated_scale(rep.tabulation))
    doc = {"diffusion": _describe(cfg), **rep.as_dict(),
           "monte_carlo": {"deficits": mc, "scale_gap": gap.as_dict()}}
    if args.json:
        out.write(render_json(doc))
    else:
        out.write(_render_table(rep, cfg))
        out.write("\nVerdicts\n")
        for k, s in rep.sides.items():
            out.write(f"  {s.verdict.process:15s} {s.verdict.verdict.value}\n")
        out.write(f"  {'scale_process':15s} {rep.kotani.verdict.value}\n")
        out.write(f"\nMonte Carlo (r={r:g}, x0={sim.initial_state:g}, t={sim.horizon:g}, "
                  f"dt={sim.step:g}, paths={sim.paths})\n")
        for side, d in mc.items():
            e = d["deficit"]
            out.write(f"  {side:5s} deficit {e['mean']:.6g} +/- {e['half_width']:.3g}  "
                      f"{d['mc_verdict']}\n")
        out.write(f"  E[p(X_t)] - p(x0) = {gap.mean:.6g} +/- {gap.half_width:.3g}\n")
    return EXIT_OK


# -- rendering -------------------------------------------------------------

def _describe(cfg):
    spec = cfg.diffusion
    return {"name": spec.name, "params": dict(spec.params),
            "interval": [spec.interval.alpha, spec.interval.beta],
            "reference_point": spec.reference_point, "rates": list(cfg.rates)}


def _title(cfg):
    spec = cfg.diffusion
    params = ", ".join(f"{k}={v}" for k, v in spec.params.items())
    return f"{spec.name}({params}) on {spec.interval}"


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None:
        return "-"
    return f"{v:.6g}"


def _render_table(rep, cfg):
    lines = [_title(cfg)]
    for side, s in rep.sides.items():
        b = s.boundary
        lines.append("")
        lines.append(f"{side}: {b.kind.value} (I_access={_fmt(b.test_values[0])}, "
                     f"I_nature={_fmt(b.test_values[1])})")
        lines.append(f"  A  {s.verdict.process}: {s.verdict.verdict.value}")
        if not s.rows:
            lines.append("  rows B-F not applicable at an accessible endpoint")
            continue
        lines.append(f"  {'row':16s} {'natural':>22s} {'entrance':>22s}")
        for key, val in s.rows.items():
            if hasattr(val, "regime"):
                text = f"{val.regime.value} {_fmt(val.value)}" if val.column != "natural" else val.regime.value
                col = val.column
            else:
                text = "diverges" if val.diverged else f"finite {_fmt(val.value)}"
                col = "natural" if val.diverged else "entrance"
            nat = text if col == "natural" else ""
            ent = text if col == "entrance" else ""
            if col is None:
                ent = text + " (?)"
            lines.append(f"  {key:16s} {nat:>22s} {ent:>22s}")
        lines.append(f"  concordant: {s.concordant}")
    lines.append("")
    lines.append(f"scale_process (Kotani): {rep.kotani.verdict.value}")
    return "\n".join(lines) + "\n"


# -- entry point -----------------------------------------------------------

def _add_source(p):
    g = p.add_argument_group("diffusion")
    g.add_argument("--config", help="JSON run configuration")
    g.add_argument("--family", help="catalog family (brownian, gbm, bessel, cir, ou)")
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="catalog parameter (repeatable)")
    g.add_argument("--drift", help="custom drift expression in x")
    g.add_argument("--volatility", help="custom volatility expression in x")
    g.add_argument("--interval", nargs=2, metavar=("ALPHA", "BETA"), help="custom interval (use inf)")
    g.add_argument("--reference-point", type=float, help="custom reference point")
    p.add_argument("--rates", type=float, nargs="+", help="discount rates")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _add_sim(p, with_x0=True):
    g = p.add_argument_group("simulation")
    if with_x0:
        g.add_argument("--x0", type=float, help="initial state (default: reference point)")
    g.add_argument("--t", type=float, help="time horizon")
    g.add_argument("--dt", type=float, help="Euler step")
    g.add_argument("--paths", type=int, help="number of paths")
    g.add_argument("--seed", type=int, help="RNG seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="rexcessive", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="Feller classification of both endpoints")
    _add_source(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("solve", help="tabulate psi_r or phi_r as CSV")
    _add_source(p)
    p.add_argument("--r", type=float, help="discount rate (default: first configured rate)")
    p.add_argument("--direction", choices=["increasing", "decreasing", "psi", "phi"], default="increasing")
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.add_argument("--log-space", action="store_true", help="write log values and log |derivative|")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table", help="diagnostic rows B-F per endpoint")
    _add_source(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("verdict", help="martingale verdicts")
    _add_source(p)
    p.set_defaults(func=cmd_verdict)

    p = sub.add_parser("verify", help="Monte Carlo martingale test")
    _add_source(p)
    _add_sim(p)
    p.add_argument("--r", type=float, help="discount rate")
    p.add_argument("--s", type=float, help="second rate (> r) for the ratio identity")
    p.add_argument("--side", choices=["alpha", "beta"], default="beta")
    p.add_argument("--csv", help="write per-time-point deficits to this CSV")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="classification, rows, verdicts and Monte Carlo in one document")
    _add_source(p)
    _add_sim(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _run_config(args)
        return args.func(args, cfg, out)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InconclusiveError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (SolverError, QuadratureError, SimulationError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
