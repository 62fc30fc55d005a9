"""Command-line front end: simulate / analyze / validate / sweep.

Every subcommand reads an experiment description (JSON) via --config and
exits 0 on success, nonzero on configuration or runtime errors. Profiles
cap the trial count for quick runs: ci caps at 5, desk at 50, full leaves
the requested count untouched.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis
from .geometry import SystemConfig
from .harness import ExperimentSpec, run

_PROFILE_CAPS = {"ci": 5, "desk": 50, "full": None}


def _load_spec(args: argparse.Namespace) -> ExperimentSpec:
    if not args.config:
        raise ValueError("--config is required")
    spec = ExperimentSpec.from_file(args.config)
    if args.seed is not None:
        spec.master_seed = args.seed
    if args.trials is not None:
        spec.trials = args.trials
    cap = _PROFILE_CAPS.get(args.profile)
    if cap is not None:
        spec.trials = min(spec.trials, cap)
    if args.out is not None:
        spec.out_path = args.out
    spec.validate()
    return spec


def _write_table(spec: ExperimentSpec, table) -> str:
    if not spec.out_path:
        raise ValueError("no output path: pass --out or set out_path")
    table.to_csv(spec.out_path)
    return spec.out_path


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    spec.power_grid_dbm = (spec.config.tx_power_dbm,)
    path = _write_table(spec, run(spec))
    print(f"wrote {path} ({spec.kind}, {spec.trials} trials, "
          f"single point {spec.config.tx_power_dbm:.1f} dBm)")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    path = _write_table(spec, run(spec))
    print(f"wrote {path} ({spec.kind}, {spec.trials} trials, "
          f"{len(spec.power_grid_dbm)} power points)")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    cfg = spec.config
    inputs = analysis.AnalyticInputs(
        t_symbols=cfg.symbols_per_block, num_users=cfg.num_users,
        num_elements=cfg.total_elements, coding_gain=spec.coding_gain,
        num_ap_antennas=cfg.num_ap_antennas)
    traj = analysis.iterate_nmse(inputs)
    report = {
        "nmse_trajectory": [float(v) for v in traj],
        "nmse_fixed_point": float(traj[-1]),
        "flop_estimate": analysis.flop_estimate(
            cfg.num_ap_antennas, cfg.num_users, cfg.symbols_per_block,
            cfg.idd_iters, cfg.total_elements, cfg.refine_iters),
        "tracking_gate_rhs": analysis.tracking_gate_rhs(
            min(cfg.num_pilots // 2, cfg.num_users * cfg.total_elements),
            cfg.num_users, cfg.total_elements, 0.0, 0.0, 1.0),
    }
    if spec.kind == "formula_sweep":
        table = run(spec)
        if spec.out_path:
            table.to_csv(spec.out_path)
            report["csv"] = spec.out_path
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    spec.config.validate()
    trials = {"ci": 200, "desk": 1000, "full": 4000}[args.profile]
    failures = []
    for p in (0.0, 0.05):
        report = analysis.validate_appendix_traces(
            p, num_users=2, num_elements=8, t_symbols=256,
            n_trials=trials, seed=spec.master_seed)
        for name, entry in report.items():
            if isinstance(entry, dict) and not entry["within_3sigma"]:
                failures.append((p, name, entry))
    if failures:
        for p, name, entry in failures:
            print(f"self-check failed at p={p}: {name} measured "
                  f"{entry['measured']:.6g} vs predicted "
                  f"{entry['predicted']:.6g}", file=sys.stderr)
        return 1
    print("config valid; closed-form self-checks within 3 sigma")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rislink",
        description="Monte Carlo experiments for surface-assisted uplinks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
            ("simulate", _cmd_simulate,
             "run one experiment at the config's transmit power"),
            ("analyze", _cmd_analyze,
             "evaluate the closed-form predictions for a config"),
            ("validate", _cmd_validate,
             "check a config and run fast statistical self-checks"),
            ("sweep", _cmd_sweep,
             "run an experiment across its transmit-power grid")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True,
                       help="experiment description (JSON)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--out", default=None, help="output CSV path")
        p.add_argument("--trials", type=int, default=None,
                       help="override the trial count")
        p.add_argument("--profile", choices=("ci", "desk", "full"),
                       default="full", help="trial-count cap preset")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
