"""Benchmark kernels: daxpy, dgemm, and cut-off-controlled task mergesort.

Input data comes from a fixed-seed 64-bit linear congruential generator so
every run sees byte-identical arrays.  Each kernel verifies its result
against a serial oracle outside the timed section; verification failures
raise :class:`VerificationError` rather than producing records.

Pool lifecycle: every sweep point (thread count) gets its own runtime,
started before and shut down after the timed repetitions, so no state leaks
between points with different worker counts.
"""

from __future__ import annotations

from typing import Callable, List, Optional

import numpy as np

from taskmp import api, core
from taskmp.bench.config import BenchConfig, RunRecord

# Knuth's MMIX multiplier/increment, modulus 2**64.
LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
_M64 = (1 << 64) - 1
DEFAULT_SEED = 123456789

DAXPY_SCALE = 2.5


class VerificationError(RuntimeError):
    """A kernel result disagreed with its serial oracle."""


def lcg_next(state: int) -> int:
    """One scalar LCG step; the reference the vectorized path is tested against."""
    return (state * LCG_A + LCG_C) & _M64


def lcg_uint64(count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """First ``count`` raw LCG states after ``seed``, as uint64.

    Vectorized as a block recurrence: with the j-step affine map
    x -> A^j x + C*(A^(j-1)+...+1) (mod 2**64), a block of B lanes advances
    from a single carried state in O(count/B) numpy passes.  Constants are
    precomputed with Python ints (masked to 64 bits) to avoid numpy scalar
    overflow warnings; array arithmetic wraps silently.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    out = np.empty(count, dtype=np.uint64)
    if count == 0:
        return out
    block = min(count, 65536)
    # a_pows[j] = A**j mod 2**64; c_sums[j] = C*(A**(j-1)+...+A+1) mod 2**64,
    # so state_{k+j} = a_pows[j]*state_k + c_sums[j].
    a_pows = [1]
    c_sums = [0]
    for _ in range(block):
        a_pows.append((a_pows[-1] * LCG_A) & _M64)
        c_sums.append((c_sums[-1] * LCG_A + LCG_C) & _M64)
    jump_a = np.array(a_pows[1 : block + 1], dtype=np.uint64)
    jump_c = np.array(c_sums[1 : block + 1], dtype=np.uint64)
    state = np.uint64(seed & _M64)
    pos = 0
    while pos < count:
        take = min(block, count - pos)
        vals = jump_a[:take] * state + jump_c[:take]
        out[pos : pos + take] = vals
        state = vals[-1]
        pos += take
    return out


def lcg_int32(count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Signed 32-bit values from the high halves of the LCG states."""
    vals = lcg_uint64(count, seed)
    return (vals >> np.uint64(32)).astype(np.uint32).view(np.int32)


def lcg_unit_float64(count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Doubles in [0, 1) from the top 53 bits of the LCG states."""
    vals = lcg_uint64(count, seed)
    return (vals >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


# ---------------------------------------------------------------------------
# daxpy: b += scale * a over float32 arrays, worksharing-partitioned.


def run_daxpy(cfg: BenchConfig) -> List[RunRecord]:
    n = cfg.n
    raw = lcg_int32(2 * n, cfg.seed)
    a = raw[:n].astype(np.float32)
    b0 = raw[n:].astype(np.float32)
    scale = np.float32(DAXPY_SCALE)

    records: List[RunRecord] = []
    for t in cfg.threads:
        b = b0.copy()
        times: List[float] = []

        def body():
            me = api.icv_query("thread_num")

            def block(lo: int, hi: int):
                b[lo:hi] += scale * a[lo:hi]

            for _ in range(cfg.reps):
                core.barrier()
                t0 = api.wall_clock() if me == 0 else 0.0
                core.for_static_blocks(0, n, block)
                if me == 0:
                    times.append(api.wall_clock() - t0)

        core.start(t)
        try:
            core.parallel_region(t, body)
        finally:
            core.stop()

        if cfg.verify:
            expect = b0.copy()
            for _ in range(cfg.reps):
                expect += scale * a
            if not np.array_equal(b, expect):
                raise VerificationError(
                    "daxpy result differs from serial replay at threads=%d" % t
                )
        for rep, sec in enumerate(times):
            mflops = 2.0 * n / sec / 1e6
            records.append(RunRecord("daxpy", n, None, t, rep, sec, mflops))
    return records


# ---------------------------------------------------------------------------
# dgemm: C <- C + A @ B over float64, the i loop partitioned into row blocks.


def run_dgemm(cfg: BenchConfig) -> List[RunRecord]:
    n = cfg.n
    u = lcg_unit_float64(2 * n * n, cfg.seed)
    A = u[: n * n].reshape(n, n)
    B = u[n * n :].reshape(n, n)

    records: List[RunRecord] = []
    for t in cfg.threads:
        C = np.zeros((n, n), dtype=np.float64)
        times: List[float] = []

        def body():
            me = api.icv_query("thread_num")

            def block(lo: int, hi: int):
                C[lo:hi] += A[lo:hi] @ B

            for _ in range(cfg.reps):
                core.barrier()
                t0 = api.wall_clock() if me == 0 else 0.0
                core.for_static_blocks(0, n, block)
                if me == 0:
                    times.append(api.wall_clock() - t0)

        core.start(t)
        try:
            core.parallel_region(t, body)
        finally:
            core.stop()

        if cfg.verify:
            ref = np.zeros((n, n), dtype=np.float64)
            for _ in range(cfg.reps):
                ref += A @ B
            if not np.allclose(C, ref, rtol=1e-10, atol=1e-12):
                raise VerificationError(
                    "dgemm result outside tolerance of serial oracle at threads=%d" % t
                )
        for rep, sec in enumerate(times):
            records.append(RunRecord("dgemm", n, None, t, rep, sec, sec))
    return records


# ---------------------------------------------------------------------------
# sort: four-way task mergesort with a serial cut-off.


def split_points(lo: int, hi: int) -> List[int]:
    """Five boundaries cutting [lo, hi) into ceil(size/4)-sized parts.

    The first three parts get ceil(size/4) elements (clamped to what is
    left) and the fourth gets the remainder, so boundaries never overshoot
    ``hi`` even for tiny ranges.
    """
    size = hi - lo
    q = -(-size // 4)
    return [lo + min(k * q, size) for k in range(5)]


def _merge_pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(len(a) + len(b), dtype=a.dtype)
    idx = np.searchsorted(a, b, side="left") + np.arange(len(b))
    mask = np.ones(len(out), dtype=bool)
    mask[idx] = False
    out[idx] = b
    out[mask] = a
    return out


def _sort_task(arr: np.ndarray, lo: int, hi: int, cutoff: int):
    size = hi - lo
    # size <= 1 terminates even with cutoff=1, where ceil(size/4) == size
    # would otherwise recurse forever.
    if size <= 1 or size < cutoff:
        arr[lo:hi].sort()
        return
    b = split_points(lo, hi)
    for k in range(4):
        core.create_task(_sort_task, arr, b[k], b[k + 1], cutoff)
    core.task_wait()
    left = _merge_pair(arr[b[0] : b[1]], arr[b[1] : b[2]])
    right = _merge_pair(arr[b[2] : b[3]], arr[b[3] : b[4]])
    arr[lo:hi] = _merge_pair(left, right)


def sort_task_oracle(n: int, cutoff: int) -> int:
    """Task count the sort must report, from the size recurrence alone.

    T(s) = 0 when s <= 1 or s < cutoff, else 4 + sum of T over the four
    split parts.  Memoized on size; sibling parts mostly share sizes.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    memo = {}

    def t(size: int) -> int:
        if size <= 1 or size < cutoff:
            return 0
        got = memo.get(size)
        if got is not None:
            return got
        q = -(-size // 4)
        bounds = [min(k * q, size) for k in range(5)]
        total = 4 + sum(t(bounds[k + 1] - bounds[k]) for k in range(4))
        memo[size] = total
        return total

    return t(n)


def run_sort(cfg: BenchConfig) -> List[RunRecord]:
    if cfg.cutoff is None:
        raise ValueError("sort requires a cutoff")
    n, cutoff = cfg.n, cfg.cutoff
    base = lcg_int32(n, cfg.seed)
    expect = np.sort(base) if cfg.verify else None
    oracle = sort_task_oracle(n, cutoff)

    records: List[RunRecord] = []
    for t in cfg.threads:
        core.start(t)
        try:
            for rep in range(cfg.reps):
                arr = base.copy()
                before = core.tasks_created()
                t0 = api.wall_clock()
                core.parallel_region(
                    t,
                    lambda: core.construct(
                        "single", lambda: _sort_task(arr, 0, n, cutoff)
                    ),
                )
                sec = api.wall_clock() - t0
                count = core.tasks_created() - before
                if cfg.verify:
                    if not np.array_equal(arr, expect):
                        raise VerificationError(
                            "sort output differs from serial oracle "
                            "(n=%d cutoff=%d threads=%d)" % (n, cutoff, t)
                        )
                    if count != oracle:
                        raise VerificationError(
                            "sort created %d tasks, recurrence predicts %d "
                            "(n=%d cutoff=%d)" % (count, oracle, n, cutoff)
                        )
                records.append(RunRecord("sort", n, cutoff, t, rep, sec, sec, count))
        finally:
            core.stop()
    return records


RUNNERS: dict = {
    "daxpy": run_daxpy,
    "dgemm": run_dgemm,
    "sort": run_sort,
}


def run_benchmark(cfg: BenchConfig) -> List[RunRecord]:
    try:
        runner: Callable[[BenchConfig], List[RunRecord]] = RUNNERS[cfg.benchmark]
    except KeyError:
        raise ValueError("unknown benchmark %r" % (cfg.benchmark,))
    return runner(cfg)
