"""Sweep configuration and the flat per-repetition record format.

One CSV row per repetition, schema fixed:

    benchmark,n,cutoff,threads,rep,seconds,metric,task_count

``cutoff`` and ``task_count`` are empty for benchmarks that have no cut-off
notion (everything except sort).  Files are UTF-8 with LF line endings and
'.' as the decimal separator, so downstream tools can pivot them into
heatmaps or speedup plots without locale guesswork.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

CSV_COLUMNS = (
    "benchmark",
    "n",
    "cutoff",
    "threads",
    "rep",
    "seconds",
    "metric",
    "task_count",
)


@dataclass
class BenchConfig:
    """Echo of one CLI invocation: what to run and how to sweep it."""

    benchmark: str
    n: int
    threads: Sequence[int] = (1,)
    reps: int = 5
    seed: int = 0
    cutoff: Optional[int] = None  # sort only
    csv_path: Optional[str] = None
    verify: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.threads:
            raise ValueError("at least one thread count is required")
        for t in self.threads:
            if t < 1:
                raise ValueError("thread counts must be >= 1")
        if self.cutoff is not None and self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")


@dataclass
class RunRecord:
    """One timed repetition at one sweep point."""

    benchmark: str
    n: int
    cutoff: Optional[int]
    threads: int
    rep: int
    seconds: float
    metric: float
    task_count: Optional[int] = None

    def to_row(self) -> List[str]:
        return [
            self.benchmark,
            str(self.n),
            "" if self.cutoff is None else str(self.cutoff),
            str(self.threads),
            str(self.rep),
            repr(self.seconds),
            repr(self.metric),
            "" if self.task_count is None else str(self.task_count),
        ]

    @staticmethod
    def from_row(row: Sequence[str]) -> "RunRecord":
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(
                "expected %d columns, got %d: %r" % (len(CSV_COLUMNS), len(row), row)
            )
        return RunRecord(
            benchmark=row[0],
            n=int(row[1]),
            cutoff=int(row[2]) if row[2] != "" else None,
            threads=int(row[3]),
            rep=int(row[4]),
            seconds=float(row[5]),
            metric=float(row[6]),
            task_count=int(row[7]) if row[7] != "" else None,
        )


def write_csv(path: str, records: Iterable[RunRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow(rec.to_row())


def read_csv(path: str) -> List[RunRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError("unrecognized CSV header in %s: %r" % (path, header))
        return [RunRecord.from_row(row) for row in r if row]
