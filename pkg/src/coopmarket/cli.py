"""Command-line entry point: ``coopmarket <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import export
from .config import ScenarioConfig
from .data import build_scenario, synthesize_profiles, write_profiles_csv
from .experiments import run_experiment_loss_reduction, run_experiment_welfare
from .settlement import settle
from .simulation import run_simulation

log = logging.getLogger("coopmarket")


def _common(p):
    p.add_argument("--config", type=Path, help="scenario config (JSON)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--dump-lp", action="store_true", help="write every cleared LP instance")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopmarket", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one mechanism and export the trace")
    _common(p)
    p.add_argument("--mechanism", type=int, choices=(0, 1, 2), default=2)

    p = sub.add_parser("settle", help="run all mechanisms and settle payments")
    _common(p)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("exp-loss", help="loss reduction vs. scale and efficiency spread")
    _common(p)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--sizes", type=int, nargs="+", default=[10, 20])
    p.add_argument("--eta-stds", type=float, nargs="+", default=[0.0, 0.02, 0.05, 0.1])

    p = sub.add_parser("exp-welfare", help="payments and welfare of one cooperative")
    _common(p)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("gen-data", help="write a synthetic household CSV")
    _common(p)
    p.add_argument("--n", type=int, default=None, help="number of households")
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--output", default="profiles.csv", help="file name inside --out-dir")
    return parser


def load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_json(args.config) if args.config else ScenarioConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "n", None) is not None:
        changes["n_prosumers"] = args.n
    if getattr(args, "days", None) is not None:
        changes["days"] = args.days
    return cfg.replace(**changes) if changes else cfg


def _run(args) -> list:
    cfg = load_config(args)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    lp_dump = [] if args.dump_lp else None

    if args.command == "gen-data":
        path = out / args.output
        write_profiles_csv(path, synthesize_profiles(cfg), cfg)
        return [path, export.write_scenario(out / "scenario.json", cfg)]

    if args.command == "simulate":
        trace = run_simulation(build_scenario(cfg), args.mechanism, lp_dump=lp_dump)
        paths = export.write_trace(out, trace, cfg, args.format)
    elif args.command == "settle":
        scenario = build_scenario(cfg)
        traces = {m: run_simulation(scenario, m, lp_dump=lp_dump if m == 2 else None)
                  for m in (0, 1, 2)}
        report = settle(scenario, workers=args.workers, traces=traces)
        paths = export.write_settlement(out, report, cfg, args.format)
    elif args.command == "exp-loss":
        report = run_experiment_loss_reduction(cfg, args.trials, args.sizes, args.eta_stds)
        paths = export.write_experiment(out, report, args.format)
    else:
        report = run_experiment_welfare(cfg, workers=args.workers)
        paths = export.write_experiment(out, report, args.format)

    if lp_dump is not None:
        dump = out / "lp_instances.jsonl"
        dump.write_text("".join(json.dumps(e) + "\n" for e in lp_dump))
        paths.append(dump)
    return paths


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        paths = _run(args)
    except (ValueError, OSError) as exc:
        print(f"coopmarket {args.command}: error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
