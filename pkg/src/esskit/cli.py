"""``esskit`` command line: traces, offline optimization, online hold-out, sweeps.

Exit statuses: 0 success, 2 usage or contract error, 3 infeasible,
4 unbounded, 5 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, output_dir
from .ess import Capacities
from .heuristics import HEURISTICS, select
from .lp import Status
from .online import DEFAULT_LAMBDA, POLICY_FOR_TECH, holdout_protocol
from .programs import SWEEP_PARAMS, ContractError, optimize, sweep
from .traces import TraceParseError, gen_power_trace, gen_rsr_signal, save_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_UNBOUNDED = 4
EXIT_INTERNAL = 5

log = logging.getLogger("esskit")


class UsageError(Exception):
    pass


def _caps_arg(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected P,E")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError("capacities must be numbers") from None


def _grid_arg(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:num`` (inclusive linspace)."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            return [float(x) for x in np.linspace(float(start), float(stop), int(num))]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    d = output_dir(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_gen_trace(args) -> int:
    cfg = load_config(args.config)
    # unset flags fall back to the configured generator
    g = dict(cfg.traces.get(args.kind, {}))
    g.pop("downsample", None)
    flags = {
        "slots": args.slots, "slot_seconds": args.slot_seconds, "seed": args.seed,
        "tau": args.tau, "mean_reversion": args.mean_reversion,
        "peak_kw": args.peak_kw, "base_fraction": args.base_fraction, "noise_fraction": args.noise_fraction,
    }
    g.update({k: v for k, v in flags.items() if v is not None})
    slots = int(g.pop("slots", 21600 if args.kind == "rsr" else 96))
    if args.kind == "rsr":
        allowed = ("slot_seconds", "tau", "mean_reversion", "seed")
        trace = gen_rsr_signal(slots, **{k: g[k] for k in allowed if k in g})
    else:
        allowed = ("slot_seconds", "peak_kw", "base_fraction", "noise_fraction", "seed")
        trace = gen_power_trace(slots, **{k: g[k] for k in allowed if k in g})
    out = Path(args.out) if args.out else _out_dir(args) / f"trace_{args.kind}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(trace, out)
    print(out)
    return EXIT_OK


def _status_exit(status: Status) -> int:
    return {Status.OPTIMAL: EXIT_OK, Status.INFEASIBLE: EXIT_INFEASIBLE, Status.UNBOUNDED: EXIT_UNBOUNDED}[status]


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    tech = cfg.tech(args.tech)
    fixed = tuple(args.fix_caps) if args.fix_caps else None
    tracked = None
    beta = None
    if args.program == "rsr":
        signal = cfg.rsr_signal(args.trace)
        overrides = {"fixed_caps": fixed}
        if args.rho2 is not None:
            overrides["rho2"] = args.rho2
        spec = cfg.rsr_spec(signal, **overrides)
        if spec.rho2 < 1:
            if args.heuristic is None:
                raise UsageError("--heuristic is required when rho2 < 1")
            tracked = list(select(args.heuristic, signal.values, spec.rho2, args.seed))
        beta = signal.values
    elif args.program == "cr":
        spec = cfg.cr_spec(fixed_caps=fixed)
    else:
        spec = cfg.ps_spec(cfg.power_trace(args.trace), fixed_caps=fixed)
    plan = optimize(tech, spec, tracked, method=args.method)
    report = plan.to_dict()
    report["tech"] = tech.name
    out = _out_dir(args)
    stem = f"plan_{args.program}_{tech.name}"
    _write_json(out / f"{stem}.json", report)
    if plan.optimal:
        plan.schedule.to_csv(out / f"{stem}_schedule.csv", beta=beta)
    print(json.dumps(report, indent=2, sort_keys=True))
    return _status_exit(plan.lp_status)


def cmd_online(args) -> int:
    cfg = load_config(args.config)
    tech = cfg.tech(args.tech)
    kind = args.policy or POLICY_FOR_TECH.get(tech.name, "battery")
    lam_defaults = cfg.online.get("lambda", DEFAULT_LAMBDA)
    lam = args.lam if args.lam is not None else float(lam_defaults[kind])
    if not 0 <= lam <= 1:
        raise UsageError("--lambda must lie in [0, 1]")
    caps = Capacities(*args.fix_caps) if args.fix_caps else cfg.caps(tech.name)
    rho1 = args.rho1 if args.rho1 is not None else float(cfg.online.get("rho1", 0.2))
    rho2 = args.rho2 if args.rho2 is not None else float(cfg.online.get("rho2", 0.9))
    window = args.window_hours or int(cfg.online.get("window_hours", 12))
    signal = cfg.rsr_signal(args.trace)
    price = cfg.programs.get("rsr", {})
    hours = holdout_protocol(
        tech, caps, signal, lam, rho1, rho2, kind, window,
        reserve_price=float(price.get("reserve_price", 0.1)),
        penalty_coeff=float(price.get("penalty_coeff", 1.0)),
        seed=args.seed,
    )
    per_hour = [h.report() for h in hours]
    report = {
        "tech": tech.name,
        "policy": kind,
        "lambda": lam,
        "rho1": rho1,
        "rho2": rho2,
        "hours": per_hour,
        "aggregate": {
            "feasible_hours": sum(h.online.feasible for h in hours),
            "zero_violation_hours": sum(h.online.violations == 0 for h in hours),
            "test_hours": len(hours),
            "mean_online_revenue": float(np.mean([h.online.revenue_per_day for h in hours])),
            "mean_offline_revenue": float(np.mean([h.offline_revenue for h in hours])),
        },
    }
    out = _out_dir(args)
    _write_json(out / f"online_{tech.name}.json", report)
    for h in hours:
        h.online.to_csv(out / f"online_{tech.name}_hour{h.hour:02d}.csv")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    tech = cfg.tech(args.tech)
    for name in (args.axis1, args.axis2):
        if name is not None and name not in SWEEP_PARAMS:
            raise UsageError(f"unknown axis {name!r}; expected one of {SWEEP_PARAMS}")
    if (args.axis2 is None) != (args.grid2 is None):
        raise UsageError("--axis2 and --grid2 go together")
    fixed = tuple(args.fix_caps) if args.fix_caps else None
    tracked = None
    if args.program == "rsr":
        signal = cfg.rsr_signal(args.trace)
        overrides = {"fixed_caps": fixed}
        if args.rho2 is not None:
            overrides["rho2"] = args.rho2
        spec = cfg.rsr_spec(signal, **overrides)
        if spec.rho2 < 1:
            if args.heuristic is None:
                raise UsageError("--heuristic is required when rho2 < 1")
            tracked = list(select(args.heuristic, signal.values, spec.rho2, args.seed))
    elif args.program == "cr":
        spec = cfg.cr_spec(fixed_caps=fixed)
    else:
        spec = cfg.ps_spec(cfg.power_trace(args.trace), fixed_caps=fixed)
    axis2 = (args.axis2, args.grid2) if args.axis2 else None
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    result = sweep(tech, spec, (args.axis1, args.grid1), axis2, tracked, workers, args.method)
    out = Path(args.out) if args.out else _out_dir(args) / f"sweep_{args.program}_{tech.name}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    result.to_csv(out)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esskit", description="Energy storage market-program planner.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trace=True):
        p.add_argument("--config", default=None, help="calibration JSON (default ./defaults.json)")
        p.add_argument("--out-dir", default=".", help="output directory (ESSKIT_OUT overrides)")
        if trace:
            p.add_argument("--trace", default=None, help="trace CSV (default: generated from config)")

    g = sub.add_parser("gen-trace", help="write a synthetic trace CSV")
    g.add_argument("--kind", required=True, choices=("rsr", "power"))
    g.add_argument("--slots", type=int, default=None)
    g.add_argument("--slot-seconds", type=float, default=None)
    g.add_argument("--tau", type=float, default=None)
    g.add_argument("--mean-reversion", type=float, default=None)
    g.add_argument("--peak-kw", type=float, default=None)
    g.add_argument("--base-fraction", type=float, default=None)
    g.add_argument("--noise-fraction", type=float, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None)
    common(g, trace=False)
    g.set_defaults(func=cmd_gen_trace)

    o = sub.add_parser("optimize", help="offline profit-maximizing plan for one program")
    o.add_argument("--program", required=True, choices=("rsr", "cr", "ps"))
    o.add_argument("--tech", required=True)
    o.add_argument("--fix-caps", type=_caps_arg, default=None, metavar="P,E")
    o.add_argument("--rho2", type=float, default=None)
    o.add_argument("--heuristic", choices=HEURISTICS, default=None)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--method", choices=("highs", "simplex"), default="highs")
    common(o)
    o.set_defaults(func=cmd_optimize)

    n = sub.add_parser("online", help="hold-out test of the online policy")
    n.add_argument("--tech", required=True)
    n.add_argument("--lambda", dest="lam", type=float, default=None)
    n.add_argument("--window-hours", type=int, default=None)
    n.add_argument("--policy", choices=tuple(DEFAULT_LAMBDA), default=None)
    n.add_argument("--fix-caps", type=_caps_arg, default=None, metavar="P,E")
    n.add_argument("--rho1", type=float, default=None)
    n.add_argument("--rho2", type=float, default=None)
    n.add_argument("--seed", type=int, default=0)
    common(n)
    n.set_defaults(func=cmd_online)

    s = sub.add_parser("sweep", help="profit over a one- or two-parameter grid")
    s.add_argument("--program", required=True, choices=("rsr", "cr", "ps"))
    s.add_argument("--tech", required=True)
    s.add_argument("--axis1", required=True)
    s.add_argument("--grid1", required=True, type=_grid_arg)
    s.add_argument("--axis2", default=None)
    s.add_argument("--grid2", default=None, type=_grid_arg)
    s.add_argument("--fix-caps", type=_caps_arg, default=None, metavar="P,E")
    s.add_argument("--rho2", type=float, default=None)
    s.add_argument("--heuristic", choices=HEURISTICS, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=None, help="worker processes (default: core count)")
    s.add_argument("--method", choices=("highs", "simplex"), default="highs")
    s.add_argument("--out", default=None)
    common(s)
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ContractError, ConfigError, TraceParseError, ValueError, KeyError) as exc:
        print(f"esskit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # anything else is a bug
        log.exception("internal error")
        print(f"esskit {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
