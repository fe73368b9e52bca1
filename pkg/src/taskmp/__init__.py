"""taskmp: a latch-synchronized task-parallel runtime.

Layers, bottom up:

- `taskmp.latch`: countable latch, the only synchronization primitive.
- `taskmp.pool`: worker pool, completion handles, context slots.
- `taskmp.core`: parallel regions, explicit tasks, worksharing,
  taskgroups with reductions, task dependencies.
- `taskmp.api`: ICV queries, locks, wall clock.
- `taskmp.bench`: benchmark kernels and the `bench` CLI.
"""

from taskmp.latch import Latch
from taskmp.pool import (
    CompletionHandle,
    WorkerPool,
    context_get,
    context_set,
    pool_shutdown,
    pool_start,
    spawn,
    when_all,
)
from taskmp.core import (
    Cell,
    Icvs,
    ReductionItem,
    TaskContext,
    TaskGroup,
    Team,
    barrier,
    construct,
    create_task,
    create_task_depend,
    current_context,
    current_team,
    for_static,
    for_static_blocks,
    parallel_region,
    reduction_private,
    runtime,
    start,
    static_partition,
    stop,
    task_wait,
    task_yield,
    taskgroup,
    tasks_created,
)
from taskmp.api import (
    NestedLock,
    PlainLock,
    icv_query,
    icv_set,
    lock_op,
    team_depth,
    tick,
    wall_clock,
)

__version__ = "0.1.0"

__all__ = [
    "Latch",
    "CompletionHandle",
    "WorkerPool",
    "pool_start",
    "pool_shutdown",
    "spawn",
    "when_all",
    "context_get",
    "context_set",
    "Cell",
    "Icvs",
    "ReductionItem",
    "TaskContext",
    "TaskGroup",
    "Team",
    "barrier",
    "construct",
    "create_task",
    "create_task_depend",
    "current_context",
    "current_team",
    "for_static",
    "for_static_blocks",
    "parallel_region",
    "reduction_private",
    "runtime",
    "start",
    "static_partition",
    "stop",
    "task_wait",
    "task_yield",
    "taskgroup",
    "tasks_created",
    "NestedLock",
    "PlainLock",
    "icv_query",
    "icv_set",
    "lock_op",
    "team_depth",
    "tick",
    "wall_clock",
    "__version__",
]
