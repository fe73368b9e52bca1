"""Task-parallel semantics: regions, explicit tasks, barriers,
taskgroups with reductions, dependencies, and worksharing.

All joining is done with countable latches and nothing else. The
accounting scheme:

- every task context owns a latch counting its outstanding direct
  children (task_wait waits on it);
- every team owns a latch counting all outstanding explicit tasks
  bound to the team, transitively (the second half of a barrier);
- every taskgroup owns a latch armed at one; tasks created inside the
  group, including by descendants, count it up, and the group's end
  removes the arm and waits.

A parallel region spawns one implicit task per member on the pool and
joins them through a thread latch armed at n+1: each member counts
down once after the closing barrier, the encountering task counts
down the extra unit and waits. Implicit tasks are marked exclusive:
they rendezvous with each other at barriers, so they must never be
run inline on another member's stack.
"""

import os
import threading
from contextlib import contextmanager

from taskmp.latch import Latch, get_progress_hook
from taskmp import pool as _pool

__all__ = [
    "Cell",
    "ReductionItem",
    "TaskGroup",
    "Team",
    "TaskContext",
    "Runtime",
    "start",
    "stop",
    "runtime",
    "current_team",
    "current_context",
    "tasks_created",
    "parallel_region",
    "create_task",
    "create_task_depend",
    "task_wait",
    "barrier",
    "task_yield",
    "taskgroup",
    "reduction_private",
    "reduction_finalize",
    "static_partition",
    "for_static",
    "for_static_blocks",
    "construct",
]


class _Counter:
    __slots__ = ("_lock", "value")

    def __init__(self):
        self._lock = threading.Lock()
        self.value = 0

    def incr(self, n=1):
        with self._lock:
            self.value += n
            return self.value


class Cell:
    """Mutable value holder; reduction targets and privates are Cells."""

    __slots__ = ("value",)

    def __init__(self, value=None):
        self.value = value

    def __repr__(self):
        return "Cell(%r)" % (self.value,)


class ReductionItem:
    """One reduction: identity constructor, combiner, and target cell.

    `init()` must build the identity element (combine(init(), x) == x);
    `combine(a, b)` must be associative. The final value is folded into
    `target.value`, which also supplies the starting value.
    """

    __slots__ = ("init", "combine", "target")

    def __init__(self, init, combine, target=None):
        self.init = init
        self.combine = combine
        self.target = target if target is not None else Cell(init())

    @property
    def value(self):
        return self.target.value


class TaskGroup:
    __slots__ = ("latch", "parent", "reductions", "_lock", "_private",
                 "_finalized", "first_error")

    def __init__(self, parent, reductions):
        self.latch = Latch(1)  # armed; removed by the group's end
        self.parent = parent
        self.reductions = tuple(reductions)
        self._lock = threading.Lock()
        self._private = {}  # (context, item) -> Cell
        self._finalized = False
        self.first_error = None

    def contains(self, group):
        g = self
        while g is not None:
            if g is group:
                return True
            g = g.parent
        return False

    def record_error(self, exc):
        with self._lock:
            if self.first_error is None:
                self.first_error = exc


class Icvs:
    """Per-task control values, inherited by copy at task creation."""

    __slots__ = ("nthreads", "dynamic")

    def __init__(self, nthreads=None, dynamic=False):
        self.nthreads = nthreads if nthreads else (os.cpu_count() or 1)
        self.dynamic = dynamic

    def copy(self):
        return Icvs(self.nthreads, self.dynamic)


class Team:
    """A set of implicit member tasks executing a region together."""

    __slots__ = ("size", "depth", "task_latch", "lock", "ws_state",
                 "barrier_latches", "tasks_created", "first_error")

    def __init__(self, size, depth):
        self.size = size
        self.depth = depth
        self.task_latch = Latch(0)  # outstanding explicit tasks, transitive
        self.lock = threading.Lock()
        self.ws_state = {}  # worksharing epoch -> shared descriptor
        self.barrier_latches = {}  # barrier epoch -> rendezvous latch
        self.tasks_created = _Counter()
        self.first_error = None

    def record_error(self, exc):
        with self.lock:
            if self.first_error is None:
                self.first_error = exc


class TaskContext:
    __slots__ = ("team", "parent", "member_index", "task_latch", "icvs",
                 "in_taskgroup", "taskgroup", "final", "dep_registry",
                 "barrier_epoch", "ws_epoch", "active_ws", "active_iter")

    def __init__(self, team, parent, member_index, icvs,
                 in_taskgroup=False, taskgroup=None, final=False):
        self.team = team
        self.parent = parent
        self.member_index = member_index
        self.task_latch = Latch(0)  # outstanding direct children
        self.icvs = icvs
        self.in_taskgroup = in_taskgroup
        self.taskgroup = taskgroup
        self.final = final
        self.dep_registry = None  # lazily: id(key) -> [key, writer, readers]
        self.barrier_epoch = 0
        self.ws_epoch = 0
        self.active_ws = None  # worksharing epoch while inside for_static
        self.active_iter = None  # current iteration index, for `ordered`


# ------------------------------------------------------------------ runtime

_rt_lock = threading.Lock()
_rt = None


class Runtime:
    def __init__(self, workers):
        self.workers = workers
        self.pool = _pool.WorkerPool(workers)
        self.tasks_created = _Counter()


def start(workers=None):
    """Start the global runtime with `workers` pool threads."""
    global _rt
    if workers is None:
        workers = os.cpu_count() or 1
    with _rt_lock:
        if _rt is not None:
            raise RuntimeError("runtime already started")
        _rt = Runtime(workers)
        return _rt


def stop(force=False):
    """Shut the runtime down after all outstanding tasks complete.

    With force=True a missing runtime is tolerated (used by cleanup
    paths); without it, stopping a stopped runtime is an error.
    """
    global _rt
    with _rt_lock:
        rt = _rt
    if rt is None:
        if force:
            return
        raise RuntimeError("runtime not started")
    # keep _rt visible while draining: tasks may still spawn
    # continuations, and those must land on this pool
    rt.pool.shutdown()
    with _rt_lock:
        if _rt is rt:
            _rt = None


@contextmanager
def runtime(workers=None):
    rt = start(workers)
    try:
        yield rt
    finally:
        stop()


def _ensure_started():
    rt = _rt
    if rt is not None:
        return rt
    with _rt_lock:
        if _rt is None:
            globals()["_rt"] = Runtime(os.cpu_count() or 1)
        return _rt


_initial_tls = threading.local()


def _current_ctx():
    ctx = _pool.context_get()
    if isinstance(ctx, TaskContext):
        return ctx
    # not inside one of our tasks (fresh thread, or a raw pool task with
    # a foreign context value): the caller acts as an initial task in
    # its own team of one, sticky per thread
    ictx = getattr(_initial_tls, "ctx", None)
    if ictx is None:
        ictx = _initial_tls.ctx = TaskContext(Team(1, depth=0), None, 0, Icvs())
    return ictx


def current_context() -> TaskContext:
    """The calling task's context (introspection)."""
    return _current_ctx()


def current_team() -> Team:
    """The calling task's team (introspection)."""
    return _current_ctx().team


def tasks_created() -> int:
    """Runtime-wide count of explicit tasks created so far."""
    rt = _rt
    return rt.tasks_created.value if rt is not None else 0


# ------------------------------------------------------------------ tasks


def _spawn_task(body, args, ctx, final):
    """Shared creation path: latch ups, wrapper, dispatch."""
    rt = _ensure_started()
    team = ctx.team
    group = ctx.taskgroup if ctx.in_taskgroup else None
    child = TaskContext(team, ctx, ctx.member_index, ctx.icvs.copy(),
                        in_taskgroup=ctx.in_taskgroup, taskgroup=group,
                        final=ctx.final or final)
    ctx.task_latch.count_up(1)
    team.task_latch.count_up(1)
    if group is not None:
        group.latch.count_up(1)
    team.tasks_created.incr(1)
    rt.tasks_created.incr(1)

    def run():
        try:
            try:
                body(*args)
            except BaseException as e:
                team.record_error(e)
                if group is not None:
                    group.record_error(e)
                raise
        finally:
            # group last: when a group latch releases, its tasks have
            # already left the team and parent counts
            ctx.task_latch.count_down(1)
            team.task_latch.count_down(1)
            if group is not None:
                group.latch.count_down(1)

    if child.final:
        # undeferred: run now on the creator's stack, under the child's
        # context, completing before create_task returns
        prev = _pool.context_get()
        _pool.context_set(child)
        try:
            try:
                run()
            except BaseException:
                pass  # recorded above; surfaces at the region/group end
        finally:
            _pool.context_set(prev)
        return None
    return rt.pool.spawn(run, context=child)


def create_task(body, *args, untied=False, final=False):
    """Create an explicit task running body(*args).

    Arguments are captured by reference at creation: later rebinding of
    the caller's variables is invisible to the task, but mutations of
    shared objects are shared. `final` forces undeferred execution on
    the creating thread, inherited by all descendants. `untied` is
    accepted and treated as tied (tasks never migrate mid-execution
    here, so the distinction has no observable effect).
    """
    del untied
    ctx = _current_ctx()
    _spawn_task(body, args, ctx, final)


def create_task_depend(body, deps, *args, final=False):
    """Create a task ordered against siblings through dependence keys.

    `deps` is an iterable of (mode, key) with mode 'in', 'out' or
    'inout'. Tasks created by the same parent with a common key are
    ordered: writers wait for all priors on the key, readers wait for
    the last writer. Keys are compared by identity and held alive by
    the registry until the parent context is dropped.
    """
    ctx = _current_ctx()
    deps = list(deps)
    for mode, _key in deps:
        if mode not in ("in", "out", "inout"):
            raise ValueError("bad dependence mode %r" % (mode,))
    if ctx.final or final:
        # undeferred execution preserves sibling program order, which
        # subsumes every dependence
        _spawn_task(body, args, ctx, True)
        return

    reg = ctx.dep_registry
    if reg is None:
        reg = ctx.dep_registry = {}
    preds = []
    for mode, key in deps:
        entry = reg.get(id(key))
        if entry is None:
            continue
        _key, writer, readers = entry
        if writer is not None:
            preds.append(writer)
        if mode != "in":
            preds.extend(readers)
    gate = _pool.when_all({id(h): h for h in preds}.values()) if preds else None

    rt = _ensure_started()
    team = ctx.team
    group = ctx.taskgroup if ctx.in_taskgroup else None
    child = TaskContext(team, ctx, ctx.member_index, ctx.icvs.copy(),
                        in_taskgroup=ctx.in_taskgroup, taskgroup=group)
    ctx.task_latch.count_up(1)
    team.task_latch.count_up(1)
    if group is not None:
        group.latch.count_up(1)
    team.tasks_created.incr(1)
    rt.tasks_created.incr(1)

    def run():
        try:
            try:
                body(*args)
            except BaseException as e:
                team.record_error(e)
                if group is not None:
                    group.record_error(e)
                raise
        finally:
            ctx.task_latch.count_down(1)
            team.task_latch.count_down(1)
            if group is not None:
                group.latch.count_down(1)

    handle = rt.pool.spawn(run, gate=gate, context=child)
    for mode, key in deps:
        entry = reg.get(id(key))
        if entry is None:
            entry = reg[id(key)] = [key, None, []]
        if mode == "in":
            entry[2].append(handle)
        else:
            entry[1] = handle
            entry[2] = []


def task_wait():
    """Wait for the calling task's direct children (not descendants)."""
    ctx = _current_ctx()
    with _pool.help_scope(lambda t: t.slot is not None and t.slot.parent is ctx):
        ctx.task_latch.wait()
    # every recorded predecessor is now complete, so dependence edges
    # against them are vacuous; drop the registry and its key pins
    ctx.dep_registry = None


def task_yield():
    """Scheduling hint; a no-op here.

    Suspending the current task in favor of an arbitrary other would
    require continuations; running one inline instead could bury this
    frame under a task that blocks on our later actions, deadlocking
    programs that are correct under true concurrency.
    """


def _team_pred(team):
    return lambda t: t.slot is not None and t.slot.team is team


def barrier():
    """Rendezvous with all team members, then wait for every explicit
    task bound to the team (including descendants of completed tasks)."""
    ctx = _current_ctx()
    team = ctx.team
    task_wait()
    pred = _team_pred(team)
    if team.size > 1:
        ctx.barrier_epoch += 1
        epoch = ctx.barrier_epoch
        with team.lock:
            rendezvous = team.barrier_latches.get(epoch)
            if rendezvous is None:
                rendezvous = team.barrier_latches[epoch] = Latch(team.size)
            # superseded epochs: releases precede any member reaching here
            team.barrier_latches.pop(epoch - 2, None)
        with _pool.help_scope(pred):
            rendezvous.count_down_and_wait()
    with _pool.help_scope(pred):
        team.task_latch.wait()


# ------------------------------------------------------------------ regions


def parallel_region(n_threads, body):
    """Run body() once per team member on n_threads members.

    The encountering task blocks until every member has finished the
    closing barrier; the first exception raised by any member or any
    explicit task of the team is re-raised here. None asks for the
    current max-threads control value.
    """
    rt = _ensure_started()
    ctx = _current_ctx()
    n = ctx.icvs.nthreads if n_threads is None else n_threads
    if n < 1:
        raise ValueError("n_threads must be >= 1, got %r" % (n,))
    team = Team(n, depth=ctx.team.depth + 1)
    thread_latch = Latch(n + 1)

    def member_main():
        try:
            try:
                body()
            except BaseException as e:
                team.record_error(e)
            barrier()  # region-closing barrier, also drains team tasks
        except BaseException as e:
            team.record_error(e)
        finally:
            thread_latch.count_down(1)

    for i in range(n):
        mctx = TaskContext(team, ctx, i, ctx.icvs.copy())
        rt.pool.spawn(member_main, context=mctx, exclusive=True)
    with _pool.help_scope(_team_pred(team)):
        thread_latch.count_down_and_wait()
    if team.first_error is not None:
        raise team.first_error


# ------------------------------------------------------------------ taskgroup


def taskgroup(body, reductions=()):
    """Run body() inside a new taskgroup and wait for every task
    created in the group, including by descendants.

    Reduction items passed here may be accumulated into from member
    tasks via reduction_private(); partial results are folded into each
    item's target cell after the group's tasks complete.
    """
    ctx = _current_ctx()
    group = TaskGroup(ctx.taskgroup if ctx.in_taskgroup else None, reductions)
    saved = (ctx.in_taskgroup, ctx.taskgroup)
    ctx.in_taskgroup = True
    ctx.taskgroup = group
    try:
        body()
    finally:
        ctx.in_taskgroup, ctx.taskgroup = saved
        pred = (lambda t: t.slot is not None and t.slot.taskgroup is not None
                and t.slot.taskgroup.contains(group))
        with _pool.help_scope(pred):
            group.latch.count_down_and_wait()
    if group.reductions:
        reduction_finalize(group)
    if group.first_error is not None:
        raise group.first_error


def reduction_private(item):
    """The calling task's private accumulator cell for `item`.

    Valid inside a task created within a taskgroup whose reductions
    include `item`; repeated calls from the same task return the same
    cell, initialized once from item.init().
    """
    ctx = _current_ctx()
    group = ctx.taskgroup
    while group is not None and item not in group.reductions:
        group = group.parent
    if group is None:
        raise RuntimeError("no enclosing taskgroup declares this reduction")
    key = (ctx, item)
    with group._lock:
        cell = group._private.get(key)
        if cell is None:
            cell = group._private[key] = Cell(item.init())
    return cell


def reduction_finalize(group):
    """Fold every private cell into its item's target. Idempotent."""
    with group._lock:
        if group._finalized:
            return
        group._finalized = True
        private = group._private
        group._private = {}
    for item in group.reductions:
        acc = item.target.value
        for (_ctx, it), cell in private.items():
            if it is item:
                acc = item.combine(acc, cell.value)
        item.target.value = acc


# ------------------------------------------------------------------ worksharing


def static_partition(lo, hi, members, chunk=None):
    """Static assignment of [lo, hi) to `members` slots.

    Returns one list of (start, stop) runs per member. Without a chunk
    the range splits into near-equal contiguous blocks, the first
    (hi-lo) % members blocks one longer. With a chunk, fixed-size
    chunks go round-robin: member i takes chunks i, i+members, ...
    """
    if hi < lo:
        raise ValueError("empty-bound range [%r, %r)" % (lo, hi))
    if members < 1:
        raise ValueError("members must be >= 1")
    if chunk is None:
        total = hi - lo
        base, extra = divmod(total, members)
        out = []
        pos = lo
        for i in range(members):
            size = base + (1 if i < extra else 0)
            out.append([(pos, pos + size)] if size else [])
            pos += size
        return out
    if chunk < 1:
        raise ValueError("chunk must be >= 1, got %r" % (chunk,))
    out = [[] for _ in range(members)]
    pos = lo
    i = 0
    while pos < hi:
        out[i % members].append((pos, min(pos + chunk, hi)))
        pos += chunk
        i += 1
    return out


def _ws_enter(ctx, kind, params):
    """Join this member to the team-wide descriptor for its next
    worksharing construct; creates it first-come. Returns the entry."""
    team = ctx.team
    ctx.ws_epoch += 1
    with team.lock:
        entry = team.ws_state.get(ctx.ws_epoch)
        if entry is None:
            entry = team.ws_state[ctx.ws_epoch] = {
                "kind": kind, "params": params, "done": 0,
                "claimed": False, "next_section": 0, "ordered": None,
            }
        elif entry["kind"] != kind or entry["params"] != params:
            raise RuntimeError(
                "worksharing mismatch: member %d brought %s%r, team has %s%r"
                % (ctx.member_index, kind, params, entry["kind"],
                   entry["params"]))
    return entry


def _ws_leave(ctx, entry):
    team = ctx.team
    with team.lock:
        entry["done"] += 1
        if entry["done"] == team.size:
            team.ws_state.pop(ctx.ws_epoch, None)


def for_static_blocks(lo, hi, body, chunk=None):
    """Worksharing loop handing each member contiguous runs.

    body(start, stop) is called once per run assigned to the calling
    member; an implicit barrier closes the loop. Every member of the
    team must reach the construct with the same bounds.
    """
    ctx = _current_ctx()
    entry = _ws_enter(ctx, "for", (lo, hi, chunk))
    ctx.active_ws = entry
    try:
        for a, b in static_partition(lo, hi, ctx.team.size, chunk)[ctx.member_index]:
            body(a, b)
    finally:
        # the closing barrier must happen even on error, or the other
        # members' barrier counts fall out of step with ours
        ctx.active_ws = None
        _ws_leave(ctx, entry)
        barrier()


def for_static(lo, hi, body, chunk=None):
    """Worksharing loop over individual indices: body(i) for each index
    assigned to the calling member, then an implicit barrier."""
    ctx = _current_ctx()

    def run_block(a, b):
        for i in range(a, b):
            ctx.active_iter = i
            try:
                body(i)
            finally:
                ctx.active_iter = None

    for_static_blocks(lo, hi, run_block, chunk)


# one lock per critical name, plus a dedicated lock for atomics
_named_locks = {}
_named_locks_guard = threading.Lock()
_atomic_lock = threading.Lock()


def acquire_parked(lock):
    """lock.acquire() that tells the pool the worker is off-duty, so a
    spare keeps the pool's width while we block."""
    if lock.acquire(blocking=False):
        return
    hook = get_progress_hook()
    if hook is None:
        lock.acquire()
        return
    hook.on_block()
    try:
        lock.acquire()
    finally:
        hook.on_unblock()


def _critical_lock(name):
    with _named_locks_guard:
        lock = _named_locks.get(name)
        if lock is None:
            lock = _named_locks[name] = threading.Lock()
        return lock


def _ordered_state(ctx):
    entry = ctx.active_ws
    if entry is None or ctx.active_iter is None:
        raise RuntimeError("ordered used outside a per-index worksharing loop")
    team = ctx.team
    with team.lock:
        state = entry["ordered"]
        if state is None:
            lo = entry["params"][0]
            state = entry["ordered"] = {
                "next": lo, "cond": threading.Condition(team.lock)}
    return state


def construct(kind, body, name=None):
    """Structured worksharing/synchronization constructs.

    kind: 'single' (one member runs body, implicit barrier), 'master'
    (member 0 only, no barrier), 'critical' (mutual exclusion, optional
    name), 'atomic' (mutual exclusion on a dedicated lock), 'sections'
    (body is a sequence of callables distributed over members, implicit
    barrier), 'ordered' (inside for_static: bodies run in iteration
    order). Returns body's result where it ran, else None.
    """
    ctx = _current_ctx()
    if kind == "single":
        entry = _ws_enter(ctx, "single", None)
        mine = False
        with ctx.team.lock:
            if not entry["claimed"]:
                entry["claimed"] = True
                mine = True
        try:
            return body() if mine else None
        finally:
            _ws_leave(ctx, entry)
            barrier()
    if kind == "master":
        if ctx.member_index == 0:
            return body()
        return None
    if kind == "critical":
        lock = _critical_lock(name)
        acquire_parked(lock)
        try:
            return body()
        finally:
            lock.release()
    if kind == "atomic":
        acquire_parked(_atomic_lock)
        try:
            return body()
        finally:
            _atomic_lock.release()
    if kind == "sections":
        bodies = list(body)
        entry = _ws_enter(ctx, "sections", len(bodies))
        team = ctx.team
        try:
            while True:
                with team.lock:
                    idx = entry["next_section"]
                    entry["next_section"] += 1
                if idx >= len(bodies):
                    break
                bodies[idx]()
        finally:
            _ws_leave(ctx, entry)
            barrier()
        return None
    if kind == "ordered":
        state = _ordered_state(ctx)
        team = ctx.team
        cond = state["cond"]
        hook = get_progress_hook()
        with team.lock:
            if state["next"] != ctx.active_iter:
                if hook is not None:
                    hook.on_block()
                try:
                    while state["next"] != ctx.active_iter:
                        cond.wait()
                finally:
                    if hook is not None:
                        hook.on_unblock()
        try:
            return body()
        finally:
            with team.lock:
                state["next"] = ctx.active_iter + 1
                cond.notify_all()
    raise ValueError("unknown construct kind %r" % (kind,))
