"""Command line: ``eyal run | experiment | aggregate | plot``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from collections import defaultdict
from pathlib import Path

from ..evo_core import Algorithm
from ..maze_env import load_maze_config
from .aggregate import STATISTICS, aggregate_curve, forward_fill, read_curve_csv, write_curve_csv
from .experiment import (
    PROFILES,
    ExperimentConfig,
    apply_profile,
    ensure_writable,
    load_experiment_config,
    run_experiment,
)
from .plot import emit_plot
from .trial import ENV_SHORT, load_trials

log = logging.getLogger("eyal")

ALGORITHMS = [a.value for a in Algorithm]


def _algorithm_list(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    for n in names:
        if n not in ALGORITHMS:
            raise argparse.ArgumentTypeError(f"unknown algorithm {n!r}; choose from {ALGORITHMS}")
    return names


def _add_training_flags(p: argparse.ArgumentParser, multi_algorithm: bool) -> None:
    if multi_algorithm:
        p.add_argument("--algorithm", type=_algorithm_list, action="extend",
                       help="algorithms to sweep; repeat or comma-separate (ga,ns,eyal,rs)")
    else:
        p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--config", type=Path, help="experiment YAML file; flags override it")
    p.add_argument("--maze-config", type=Path, help="maze geometry YAML file")
    p.add_argument("--env", choices=sorted(ENV_SHORT.values()))
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--max-steps", type=int, help="training step budget per trial")
    p.add_argument("--gamma", type=float, help="initial exploration fraction")
    p.add_argument("--alpha", type=float, help="exploration growth rate")
    p.add_argument("--beta", type=float, help="exploration decay rate")
    p.add_argument("--sigma2", type=float, help="mutation power")
    p.add_argument("--popsize", type=int)
    p.add_argument("--truncation", type=int)
    p.add_argument("--validation-episodes", type=int)
    p.add_argument("--interval", type=int, default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--no-wall-time", action="store_true",
                   help="write 0 in wall_time_s so reruns are byte-identical")


def _build_config(args: argparse.Namespace, trials_flag: bool) -> ExperimentConfig:
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    evo_changes = {}
    changes = {}
    if args.profile:
        steps, trials = apply_profile(args.profile)
        evo_changes["max_training_steps"] = steps
        if trials_flag:
            changes["trials"] = trials
    for flag, key in (("max_steps", "max_training_steps"), ("gamma", "gamma0"), ("alpha", "alpha"),
                      ("beta", "beta"), ("sigma2", "mutation_power"), ("popsize", "popsize"),
                      ("truncation", "truncation")):
        value = getattr(args, flag)
        if value is not None:
            evo_changes[key] = value
    if args.algorithm:
        changes["algorithms"] = args.algorithm if isinstance(args.algorithm, list) else [args.algorithm]
    for flag, key in (("env", "environment"), ("seed", "seed"), ("workers", "workers"),
                      ("validation_episodes", "validation_episodes"), ("interval", "interval")):
        value = getattr(args, flag)
        if value is not None:
            changes[key] = ENV_SHORT.get(value, value) if key == "environment" else value
    if trials_flag and getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if args.out_dir is not None:
        changes["out_dir"] = str(args.out_dir)
    if args.no_wall_time:
        changes["record_wall_time"] = False
    if args.maze_config:
        changes["maze"] = load_maze_config(args.maze_config)
    evo = dataclasses.replace(cfg.evo, **evo_changes)
    return dataclasses.replace(cfg, evo=evo, **changes)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args, trials_flag=False)
    cfg = dataclasses.replace(cfg, algorithms=cfg.algorithms[:1], trials=1)
    record = run_experiment(cfg)[0]
    if record.status != "ok":
        print(f"trial failed: {record.error}", file=sys.stderr)
        return 1
    print(f"{record.algorithm} {record.environment} seed {record.trial_seed}: "
          f"{len(record.rows)} generations, trial score {record.trial_score:.3f}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = _build_config(args, trials_flag=True)
    records = run_experiment(cfg)
    failed = 0
    for r in records:
        if r.status != "ok":
            failed += 1
            print(f"{r.algorithm} seed {r.trial_seed}: FAILED ({r.error})")
        else:
            print(f"{r.algorithm} seed {r.trial_seed}: trial score {r.trial_score:.3f}")
    return 1 if failed == len(records) else 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    out = ensure_writable(args.out_dir)
    groups = defaultdict(list)
    for directory in args.records_dir:
        for rec in load_trials(directory):
            if rec.status != "ok":
                log.warning("skipping failed trial %s seed %d", rec.algorithm, rec.trial_seed)
                continue
            groups[(rec.algorithm, ENV_SHORT[rec.environment])].append(rec)
    if not groups:
        print("no trial records found", file=sys.stderr)
        return 1
    for (algorithm, env), recs in sorted(groups.items()):
        series = forward_fill(recs, args.interval, args.statistic)
        curve = aggregate_curve(series, args.interval, label=algorithm)
        path = out / f"curve_{algorithm}_{env}.csv"
        write_curve_csv(curve, path)
        print(f"{path}: {len(recs)} trials, {len(curve.points)} points")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    curves = []
    for path in args.curves:
        label = path.stem.removeprefix("curve_")
        curves.append(read_curve_csv(path, label))
    emit_plot(curves, args.out, title=args.title or "")
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eyal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single trial")
    _add_training_flags(p, multi_algorithm=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run several trials for one or more algorithms")
    _add_training_flags(p, multi_algorithm=True)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("aggregate", help="forward-fill trial CSVs into mean/CI curves")
    p.add_argument("records_dir", nargs="+", type=Path)
    p.add_argument("--interval", type=int, default=10_000)
    p.add_argument("--statistic", choices=STATISTICS, default="best_so_far_validation")
    p.add_argument("--out-dir", type=Path, default=Path("curves"))
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("plot", help="render curve CSVs to SVG")
    p.add_argument("curves", nargs="+", type=Path)
    p.add_argument("--out", type=Path, default=Path("curves.svg"))
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
