"""Command-line entry point: ``coopmerge run | bench | trace-filter``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, InvalidInputError
from .estimation import write_trace_csv
from .harness import (read_records, replay_filter, resolve_out_dir, run_batch, run_trial,
                      summarize_records, write_records, write_summary_csv, write_trace)
from .planner import DEFAULT_STRATEGIES, Strategy

log = logging.getLogger("coopmerge")


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    strategy = Strategy.parse(args.strategy)
    true_c = cfg.true_c if args.true_c is None else args.true_c
    record = run_trial(cfg, strategy, true_c, args.seed, verbose=args.verbose)
    out = resolve_out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records(out / "trial.jsonl", [record])
    if record.trace:
        write_trace(out / "trace.csv", record)
    m = record.metrics
    print(f"{strategy.name} true_c={true_c:g}: outcome={record.outcome} "
          f"hard_brake={m['hard_brake']} min_ttc={m['min_ttc']:.2f} "
          f"time_to_merge={m['time_to_merge']}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    strategies = ([Strategy.parse(s) for s in args.strategies]
                  if args.strategies else list(DEFAULT_STRATEGIES))
    summaries, records = run_batch(cfg, strategies, args.n_per_cell, args.seed, args.parallel)
    out = resolve_out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records(out / "records.jsonl", records)
    write_summary_csv(out / "summary.csv", summaries)
    traces = out / "traces"
    for rec in records:
        if rec.trace:
            traces.mkdir(exist_ok=True)
            idx = rec.scenario_seed[-1]
            write_trace(traces / f"{rec.strategy}_c{rec.true_c:g}_{idx:04d}.csv", rec)
    for s in summaries:
        print(f"{s.strategy:>12} true_c={s.true_c:g}  hard_brake={s.hard_brake_rate:5.1f}%  "
              f"min_ttc={s.min_ttc_mean:6.2f}  ttm={s.ttm_mean:6.2f}  merged={s.n_merged}/{s.n_trials}")
    return 0


def _cmd_trace_filter(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    records = read_records(args.trajectory)
    if not records:
        raise ConfigError(f"{args.trajectory} holds no trial records")
    if not 0 <= args.index < len(records):
        raise ConfigError(f"record index {args.index} out of range (0..{len(records) - 1})")
    rows = replay_filter(cfg, records[args.index], args.seed)
    out = resolve_out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / "trace.csv", rows)
    t, mu, lo, hi = rows[-1]
    print(f"replayed {len(rows) - 1} steps: final mean c={mu:.3f} [{lo:.3f}, {hi:.3f}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopmerge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one trial")
    run.add_argument("--config", type=Path)
    run.add_argument("--strategy", default="learned_c",
                     help="learned_c, sidm or fixed_c=<value>")
    run.add_argument("--true-c", type=float, dest="true_c")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="strategy x true-c benchmark")
    bench.add_argument("--config", type=Path)
    bench.add_argument("--n-per-cell", type=int, default=100, dest="n_per_cell")
    bench.add_argument("--seed", type=int)
    bench.add_argument("--out")
    bench.add_argument("--parallel", type=int, default=1)
    bench.add_argument("--strategies", nargs="+", help="defaults to learned_c, fixed_c=0, fixed_c=1 and sidm")
    bench.set_defaults(func=_cmd_bench)

    trace = sub.add_parser("trace-filter", help="replay the filter over a recorded trial")
    trace.add_argument("--config", type=Path)
    trace.add_argument("--trajectory", type=Path, required=True,
                       help="JSON-lines file written by run or bench")
    trace.add_argument("--index", type=int, default=0, help="record to replay")
    trace.add_argument("--seed", type=int, default=0)
    trace.add_argument("--out")
    trace.set_defaults(func=_cmd_trace_filter)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
