"""Benchmark harness: kernels, timing sweeps, CSV records, and analysis.

Importing this package pins the usual BLAS thread-count knobs to 1 (unless
the caller already set them) so that measured scaling comes from the tasking
runtime and not from a nested BLAS pool fighting it for cores.  The pins must
land before numpy is first imported, which is why they live here rather than
in any submodule.
"""

import os as _os

for _var in (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
):
    _os.environ.setdefault(_var, "1")
del _os, _var

from taskmp.bench.config import BenchConfig, RunRecord, read_csv, write_csv
from taskmp.bench.kernels import (
    DEFAULT_SEED,
    VerificationError,
    lcg_int32,
    lcg_uint64,
    lcg_unit_float64,
    run_daxpy,
    run_dgemm,
    run_sort,
    sort_task_oracle,
    split_points,
)
from taskmp.bench.analyze import (
    RatioCell,
    SpeedupRow,
    SpeedupTable,
    compute_ratio,
    compute_speedup,
    read_ratio_csv,
    split_series,
    write_ratio_csv,
)

__all__ = [
    "BenchConfig",
    "RunRecord",
    "read_csv",
    "write_csv",
    "DEFAULT_SEED",
    "VerificationError",
    "lcg_int32",
    "lcg_uint64",
    "lcg_unit_float64",
    "run_daxpy",
    "run_dgemm",
    "run_sort",
    "sort_task_oracle",
    "split_points",
    "RatioCell",
    "SpeedupRow",
    "SpeedupTable",
    "compute_ratio",
    "compute_speedup",
    "read_ratio_csv",
    "split_series",
    "write_ratio_csv",
]
