"""Post-processing: per-series speedups and grid-vs-grid timing ratios.

Medians over repetitions are the reported statistic; raw repetitions stay in
the record stream untouched.  Rate benchmarks (daxpy) compute speedup from
the rate metric, time benchmarks from wall seconds; either way the
single-thread cell is the baseline and comes out exactly 1.0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from statistics import median
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from taskmp.bench.config import RunRecord

# Benchmarks whose metric column is a rate (bigger is better); everything
# else carries seconds in the metric column.
RATE_BENCHMARKS = frozenset(["daxpy"])

RATIO_COLUMNS = ("benchmark", "param", "threads", "ratio")

SeriesKey = Tuple[str, int, Optional[int]]


@dataclass(frozen=True)
class SpeedupRow:
    threads: int
    median_seconds: float
    median_metric: float
    speedup: float


@dataclass(frozen=True)
class SpeedupTable:
    benchmark: str
    n: int
    cutoff: Optional[int]
    rows: Tuple[SpeedupRow, ...]

    def speedup_at(self, threads: int) -> float:
        for row in self.rows:
            if row.threads == threads:
                return row.speedup
        raise KeyError("no row for threads=%d" % threads)


def split_series(records: Iterable[RunRecord]) -> Dict[SeriesKey, List[RunRecord]]:
    """Group records by (benchmark, n, cutoff), preserving first-seen order."""
    out: Dict[SeriesKey, List[RunRecord]] = {}
    for rec in records:
        out.setdefault((rec.benchmark, rec.n, rec.cutoff), []).append(rec)
    return out


def compute_speedup(records: Sequence[RunRecord]) -> SpeedupTable:
    """Fold one series (single benchmark and problem size) into speedups.

    Requires a threads=1 baseline.  For rate benchmarks
    s(t) = median_metric(t) / median_metric(1); for time benchmarks
    s(t) = median_seconds(1) / median_seconds(t).
    """
    if not records:
        raise ValueError("empty record series")
    keys = {(r.benchmark, r.n, r.cutoff) for r in records}
    if len(keys) != 1:
        raise ValueError(
            "records span multiple series %s; split them first" % sorted(
                map(str, keys)
            )
        )
    benchmark, n, cutoff = next(iter(keys))

    secs: Dict[int, List[float]] = {}
    mets: Dict[int, List[float]] = {}
    for r in records:
        secs.setdefault(r.threads, []).append(r.seconds)
        mets.setdefault(r.threads, []).append(r.metric)
    if 1 not in secs:
        raise ValueError("series has no single-thread baseline (threads=1)")

    base_sec = median(secs[1])
    base_met = median(mets[1])
    rate = benchmark in RATE_BENCHMARKS
    rows = []
    for t in sorted(secs):
        med_s = median(secs[t])
        med_m = median(mets[t])
        s = (med_m / base_met) if rate else (base_sec / med_s)
        rows.append(SpeedupRow(t, med_s, med_m, s))
    return SpeedupTable(benchmark, n, cutoff, tuple(rows))


# ---------------------------------------------------------------------------
# Ratios between two record grids over the same (parameter x threads) axes.


@dataclass(frozen=True)
class RatioCell:
    benchmark: str
    param: int
    threads: int
    ratio: float


def _param_of(rec: RunRecord) -> int:
    # The swept parameter: the cut-off for sort (problem size held fixed),
    # the problem size for everything else.
    if rec.cutoff is not None:
        return rec.cutoff
    return rec.n


def _median_grid(records: Iterable[RunRecord]) -> Dict[Tuple[str, int, int], float]:
    cells: Dict[Tuple[str, int, int], List[float]] = {}
    for rec in records:
        cells.setdefault((rec.benchmark, _param_of(rec), rec.threads), []).append(
            rec.seconds
        )
    return {key: median(vals) for key, vals in cells.items()}


def compute_ratio(
    ours: Iterable[RunRecord], theirs: Iterable[RunRecord]
) -> List[RatioCell]:
    """Per-cell runtime ratio of this runtime against a reference grid.

    Both inputs are reduced to median seconds per (benchmark, parameter,
    threads) cell; the grids must cover identical cells.  Each ratio is
    our median over theirs, so r < 1 means this runtime outperformed the
    reference on that cell, and identical inputs give exactly 1.0.
    """
    og = _median_grid(ours)
    tg = _median_grid(theirs)
    if not og:
        raise ValueError("empty record grids")
    if set(og) != set(tg):
        ours_only = sorted(map(str, set(og) - set(tg)))
        theirs_only = sorted(map(str, set(tg) - set(og)))
        raise ValueError(
            "grids do not share the same (parameter x threads) axes; "
            "only ours: %s; only theirs: %s" % (ours_only, theirs_only)
        )
    return [
        RatioCell(bench, param, threads, og[(bench, param, threads)] / tg[(bench, param, threads)])
        for bench, param, threads in sorted(og)
    ]


def write_ratio_csv(path: str, cells: Iterable[RatioCell]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATIO_COLUMNS)
        for c in cells:
            w.writerow([c.benchmark, str(c.param), str(c.threads), repr(c.ratio)])


def read_ratio_csv(path: str) -> List[RatioCell]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != RATIO_COLUMNS:
            raise ValueError("unrecognized ratio CSV header in %s: %r" % (path, header))
        return [
            RatioCell(row[0], int(row[1]), int(row[2]), float(row[3]))
            for row in r
            if row
        ]
