"""Command line front end for the benchmark sweeps.

    bench daxpy --n 1000000 --threads 1,2,4 --reps 10 --csv daxpy.csv
    bench dgemm --n 1000 --threads 1,4 --reps 5
    bench sort  --n 1000000 --cutoff 100000 --threads 1,4 --reps 5 --csv s.csv
    bench ratio --ours ours.csv --theirs theirs.csv --csv ratio.csv

Each run prints a median/speedup table per series; ``--csv`` keeps the raw
per-repetition rows, and ``--plot`` (which needs ``--csv`` for the output
location) drops a PNG next to the file.  Exit status is 0 only when every
requested verification passed; bad flags exit 2 via the usual usage error.
"""

from __future__ import annotations

import argparse
import sys
from statistics import median
from typing import Dict, List, Optional, Sequence

from taskmp.bench.analyze import (
    compute_ratio,
    compute_speedup,
    split_series,
    write_ratio_csv,
)
from taskmp.bench.config import BenchConfig, RunRecord, read_csv, write_csv
from taskmp.bench.kernels import DEFAULT_SEED, VerificationError, run_benchmark

_DEFAULTS = {
    "daxpy": {"n": 1_000_000, "reps": 10},
    "dgemm": {"n": 1000, "reps": 5},
    "sort": {"n": 1_000_000, "reps": 5},
}


def _threads_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            "expected a comma-separated list of integers, got %r" % text
        )
    if not values:
        raise argparse.ArgumentTypeError("at least one thread count is required")
    for v in values:
        if v < 1:
            raise argparse.ArgumentTypeError("thread counts must be >= 1")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Tasking runtime benchmark sweeps and grid comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("daxpy", "dgemm", "sort"):
        p = sub.add_parser(name, help="run the %s sweep" % name)
        d = _DEFAULTS[name]
        p.add_argument("--n", type=int, default=d["n"], help="problem size")
        if name == "sort":
            p.add_argument(
                "--cutoff",
                type=int,
                default=100_000,
                help="serial cut-off: partitions smaller than this sort serially",
            )
        p.add_argument(
            "--threads",
            type=_threads_list,
            default=[1],
            help="comma-separated worker counts to sweep, e.g. 1,2,4",
        )
        p.add_argument("--reps", type=int, default=d["reps"], help="repetitions per point")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="input generator seed")
        p.add_argument("--csv", help="write per-repetition records to this path")
        p.add_argument(
            "--verify",
            action=argparse.BooleanOptionalAction,
            default=True,
            help="check results against the serial oracle (default on)",
        )
        p.add_argument(
            "--plot",
            action="store_true",
            help="render a speedup PNG next to the CSV (requires --csv)",
        )

    r = sub.add_parser("ratio", help="compare two record CSVs cell by cell")
    r.add_argument("--ours", required=True, help="record CSV produced by this harness")
    r.add_argument("--theirs", required=True, help="record CSV to compare against")
    r.add_argument("--csv", help="write the ratio grid to this path")
    r.add_argument(
        "--plot",
        action="store_true",
        help="render ratio heatmaps next to the CSV (requires --csv)",
    )
    return parser


def _fmt_seconds(sec: float) -> str:
    return "%.6f" % sec


def _print_series_table(records: Sequence[RunRecord]) -> None:
    for (bench, n, cutoff), series in split_series(records).items():
        head = "%s n=%d" % (bench, n)
        if cutoff is not None:
            head += " cutoff=%d" % cutoff
        print(head)

        by_t: Dict[int, List[RunRecord]] = {}
        for rec in series:
            by_t.setdefault(rec.threads, []).append(rec)

        is_rate = bench == "daxpy"
        has_tasks = any(rec.task_count is not None for rec in series)
        try:
            table = compute_speedup(series)
            speedups: Optional[Dict[int, float]] = {
                row.threads: row.speedup for row in table.rows
            }
        except ValueError:
            speedups = None
            print("  (no single-thread baseline; speedups omitted)")

        header = "  %8s  %12s" % ("threads", "median_s")
        if is_rate:
            header += "  %12s" % "MFLOP/s"
        if speedups is not None:
            header += "  %8s" % "speedup"
        if has_tasks:
            header += "  %10s" % "tasks"
        print(header)
        for t in sorted(by_t):
            rows = by_t[t]
            line = "  %8d  %12s" % (t, _fmt_seconds(median(r.seconds for r in rows)))
            if is_rate:
                line += "  %12.1f" % median(r.metric for r in rows)
            if speedups is not None:
                line += "  %8.2f" % speedups[t]
            if has_tasks:
                counts = [r.task_count for r in rows if r.task_count is not None]
                line += "  %10d" % (counts[0] if counts else 0)
            print(line)


def _run_sweep(args: argparse.Namespace) -> int:
    cfg = BenchConfig(
        benchmark=args.command,
        n=args.n,
        threads=args.threads,
        reps=args.reps,
        seed=args.seed,
        cutoff=getattr(args, "cutoff", None),
        csv_path=args.csv,
        verify=args.verify,
    )
    records = run_benchmark(cfg)
    _print_series_table(records)
    if args.csv:
        write_csv(args.csv, records)
        print("records: %s" % args.csv)
        if args.plot:
            from taskmp.bench.plots import render_run_plot

            for path in render_run_plot(records, args.csv):
                print("figure: %s" % path)
    return 0


def _run_ratio(args: argparse.Namespace) -> int:
    ours = read_csv(args.ours)
    theirs = read_csv(args.theirs)
    cells = compute_ratio(ours, theirs)

    print("%-10s %10s %8s %8s" % ("benchmark", "param", "threads", "ratio"))
    for c in cells:
        print("%-10s %10d %8d %8.3f" % (c.benchmark, c.param, c.threads, c.ratio))
    print("(r < 1 means the --ours grid was faster on that cell)")

    if args.csv:
        write_ratio_csv(args.csv, cells)
        print("ratios: %s" % args.csv)
        if args.plot:
            from taskmp.bench.plots import render_ratio_plot

            for path in render_ratio_plot(cells, args.csv):
                print("figure: %s" % path)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "plot", False) and not args.csv:
        parser.error("--plot requires --csv to know where to write figures")
    try:
        if args.command == "ratio":
            return _run_ratio(args)
        return _run_sweep(args)
    except VerificationError as exc:
        print("verification failed: %s" % exc, file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
