"""Command line entry point: ``greyshield run`` and ``greyshield report``."""

from __future__ import annotations

import argparse
import csv
import sys

from .harness import AGENTS, RunConfig, parse_seeds, report, run_experiment
from .safety.shield import METHODS

REPORT_COLUMNS = ("run", "seed", "method", "agent", "objective_absolute",
                  "objective_relative", "initial_relative", "constraint_nmae",
                  "constraint_nsum")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="greyshield",
                                description="Safe RL energy management experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate one method over several seeds")
    run.add_argument("--config", help="sectioned key-value config file")
    run.add_argument("--method", choices=METHODS)
    run.add_argument("--agent", choices=AGENTS)
    run.add_argument("--seeds", type=parse_seeds, help="comma separated, e.g. 1,2,3")
    run.add_argument("--steps", type=int, help="training steps per seed")
    run.add_argument("--eval-interval", type=int)
    run.add_argument("--out", help="run directory")
    run.add_argument("--timing", action="store_true", default=None,
                     help="also write runtime.csv")

    rep = sub.add_parser("report", help="relative objectives against a reference run")
    rep.add_argument("--runs", nargs="+", required=True)
    rep.add_argument("--reference", required=True, help="run directory of the unsafe baseline")
    rep.add_argument("--csv", help="also write the table here")
    return p


def _run(args) -> int:
    overrides = dict(method=args.method, agent=args.agent, seeds=args.seeds,
                     training_steps=args.steps, eval_interval=args.eval_interval,
                     out=args.out, timing=args.timing)
    if args.config:
        cfg = RunConfig.from_ini(args.config, **overrides)
    else:
        cfg = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    if cfg.eval_interval > max(cfg.training_steps, 1) and args.eval_interval is None:
        cfg.eval_interval = max(cfg.training_steps, 1)
    out = run_experiment(cfg)
    print(f"wrote {out}")
    return 0


def _report(args) -> int:
    rows = report(args.runs, args.reference)
    widths = {c: max(len(c), *(len(_cell(r[c])) for r in rows)) if rows else len(c)
              for c in REPORT_COLUMNS}
    print("  ".join(c.ljust(widths[c]) for c in REPORT_COLUMNS))
    for r in rows:
        print("  ".join(_cell(r[c]).ljust(widths[c]) for c in REPORT_COLUMNS))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


def _cell(v) -> str:
    return f"{v:.3f}" if isinstance(v, float) else str(v)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args) if args.command == "run" else _report(args)
    except (OSError, ValueError, StopIteration) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
