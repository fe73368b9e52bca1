"""Optional figure rendering next to the CSV output.

The CSV is the primary artifact; these helpers exist so a sweep can drop a
quick-look PNG beside it without another tool.  matplotlib is imported
lazily with the Agg backend so headless runs work and merely importing the
package never pulls in a GUI toolkit.
"""

from __future__ import annotations

import os
from typing import Iterable, List, Sequence

from taskmp.bench.analyze import (
    RatioCell,
    compute_speedup,
    split_series,
)
from taskmp.bench.config import RunRecord


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def _series_label(benchmark: str, n: int, cutoff) -> str:
    if cutoff is not None:
        return "%s n=%d cutoff=%d" % (benchmark, n, cutoff)
    return "%s n=%d" % (benchmark, n)


def render_run_plot(records: Sequence[RunRecord], csv_path: str) -> List[str]:
    """Render a speedup-vs-threads PNG alongside ``csv_path``.

    Series without a single-thread baseline fall back to median seconds on
    a second axis scale, so the figure is still drawable for partial sweeps.
    Returns the list of written paths.
    """
    plt = _pyplot()
    base, _ = os.path.splitext(csv_path)
    out = base + ".speedup.png"

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    drew_speedup = False
    drew_seconds = False
    sec_ax = None
    for (bench, n, cutoff), series in split_series(records).items():
        label = _series_label(bench, n, cutoff)
        try:
            table = compute_speedup(series)
        except ValueError:
            if sec_ax is None:
                sec_ax = ax.twinx()
                sec_ax.set_ylabel("median seconds")
            by_t = {}
            for rec in series:
                by_t.setdefault(rec.threads, []).append(rec.seconds)
            ts = sorted(by_t)
            meds = [sorted(by_t[t])[len(by_t[t]) // 2] for t in ts]
            sec_ax.plot(ts, meds, marker="s", linestyle="--", label=label)
            drew_seconds = True
            continue
        ts = [row.threads for row in table.rows]
        ss = [row.speedup for row in table.rows]
        ax.plot(ts, ss, marker="o", label=label)
        drew_speedup = True

    ax.set_xlabel("threads")
    ax.set_ylabel("speedup vs 1 thread")
    if drew_speedup:
        lo, hi = ax.get_xlim()
        ax.plot([max(lo, 0), hi], [max(lo, 0), hi], color="gray", linewidth=0.8,
                linestyle=":", label="ideal")
        ax.set_xlim(lo, hi)
    handles, labels = ax.get_legend_handles_labels()
    if drew_seconds and sec_ax is not None:
        h2, l2 = sec_ax.get_legend_handles_labels()
        handles += h2
        labels += l2
    if handles:
        ax.legend(handles, labels, fontsize=8)
    ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]


def render_ratio_plot(cells: Sequence[RatioCell], csv_path: str) -> List[str]:
    """Render a (parameter x threads) ratio heatmap alongside ``csv_path``."""
    plt = _pyplot()
    base, _ = os.path.splitext(csv_path)
    written: List[str] = []

    by_bench = {}
    for c in cells:
        by_bench.setdefault(c.benchmark, []).append(c)
    for bench, bcells in sorted(by_bench.items()):
        params = sorted({c.param for c in bcells})
        threads = sorted({c.threads for c in bcells})
        grid = [[float("nan")] * len(threads) for _ in params]
        lut = {(c.param, c.threads): c.ratio for c in bcells}
        for i, p in enumerate(params):
            for j, t in enumerate(threads):
                if (p, t) in lut:
                    grid[i][j] = lut[(p, t)]

        fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(threads), 1.0 + 0.6 * len(params)))
        im = ax.imshow(grid, aspect="auto", cmap="RdYlGn_r")
        ax.set_xticks(range(len(threads)), [str(t) for t in threads])
        ax.set_yticks(range(len(params)), [str(p) for p in params])
        ax.set_xlabel("threads")
        ax.set_ylabel("parameter")
        ax.set_title("%s: ours / reference (r < 1 means ours faster)" % bench, fontsize=9)
        for i in range(len(params)):
            for j in range(len(threads)):
                v = grid[i][j]
                if v == v:  # not NaN
                    ax.text(j, i, "%.2f" % v, ha="center", va="center", fontsize=8)
        fig.colorbar(im, ax=ax, shrink=0.8)
        fig.tight_layout()
        out = "%s.%s.ratio.png" % (base, bench)
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)
    return written
