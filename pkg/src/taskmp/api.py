"""Control-value queries, wall clock, and locks.

Locks are owned by tasks, not threads: the runtime may run a task's
continuation on any pool thread after it blocks, so ownership follows
the task context. Blocking acquires park the worker through the pool's
progress hook (no inline task execution: a task run on this stack
while we hold or want a lock could itself need the lock, turning a
fine program into a deadlock).
"""

import os
import threading
import time

from taskmp import core
from taskmp.latch import get_progress_hook

__all__ = [
    "icv_query",
    "icv_set",
    "team_depth",
    "wall_clock",
    "tick",
    "PlainLock",
    "NestedLock",
    "lock_op",
]


def icv_query(which):
    """Read a control value as seen by the calling task.

    thread_num: member index within the current team.
    num_threads: current team size.
    max_threads: team size a parallel_region(None, ...) would request.
    num_procs: processors available to the process.
    in_parallel: whether any enclosing region is active (size > 1).
    dynamic: the stored dynamic-adjustment flag (advisory only).
    """
    ctx = core.current_context()
    if which == "thread_num":
        return ctx.member_index
    if which == "num_threads":
        return ctx.team.size
    if which == "max_threads":
        return ctx.icvs.nthreads
    if which == "num_procs":
        return os.cpu_count() or 1
    if which == "in_parallel":
        while ctx is not None:
            if ctx.team.size > 1:
                return True
            ctx = ctx.parent
        return False
    if which == "dynamic":
        return ctx.icvs.dynamic
    raise ValueError("unknown icv %r" % (which,))


def icv_set(which, value):
    """Set a control value on the calling task (inherited by its
    future children, not shared with siblings)."""
    ctx = core.current_context()
    if which == "num_threads":
        value = int(value)
        if value < 1:
            raise ValueError("num_threads must be >= 1, got %d" % value)
        ctx.icvs.nthreads = value
        return
    if which == "dynamic":
        # stored and reported; this runtime never resizes teams on its
        # own, so the flag has no behavioral effect
        ctx.icvs.dynamic = bool(value)
        return
    raise ValueError("icv %r is not settable" % (which,))


def team_depth() -> int:
    """Nesting level of the calling task's team; initial tasks are 0."""
    return core.current_context().team.depth


def wall_clock() -> float:
    """Monotonic wall time in seconds, for timing spans."""
    return time.perf_counter()


def tick() -> float:
    """Resolution of wall_clock in seconds."""
    return time.get_clock_info("perf_counter").resolution


# ------------------------------------------------------------------ locks


class PlainLock:
    """Non-nestable mutual-exclusion lock. Re-acquiring while held by
    the same task deadlocks, as for any other contender."""

    def __init__(self):
        self._lock = threading.Lock()
        self._owner = None
        self._alive = True

    def _check(self):
        if not self._alive:
            raise RuntimeError("operation on destroyed lock")

    def acquire(self):
        self._check()
        core.acquire_parked(self._lock)
        self._owner = core.current_context()

    def release(self):
        self._check()
        if self._owner is None:
            raise RuntimeError("release of an unheld lock")
        self._owner = None
        self._lock.release()

    def test(self) -> bool:
        """Acquire without blocking; returns whether the lock was taken."""
        self._check()
        if self._lock.acquire(blocking=False):
            self._owner = core.current_context()
            return True
        return False

    def reinit(self):
        if self._owner is not None:
            raise RuntimeError("init of a held lock")
        self._lock = threading.Lock()
        self._alive = True

    def destroy(self):
        if self._owner is not None:
            raise RuntimeError("destroy of a held lock")
        self._alive = False


class NestedLock:
    """Nestable lock: the owning task may re-acquire; each acquire
    returns the new hold count, each release the remaining count."""

    def __init__(self):
        self._cond = threading.Condition()
        self._owner = None
        self._count = 0
        self._alive = True

    def _check(self):
        if not self._alive:
            raise RuntimeError("operation on destroyed lock")

    def acquire(self) -> int:
        me = core.current_context()
        with self._cond:
            self._check()
            if self._owner is me:
                self._count += 1
                return self._count
            if self._owner is not None:
                hook = get_progress_hook()
                if hook is not None:
                    hook.on_block()
                try:
                    while self._owner is not None:
                        self._cond.wait()
                finally:
                    if hook is not None:
                        hook.on_unblock()
            self._owner = me
            self._count = 1
            return 1

    def release(self) -> int:
        me = core.current_context()
        with self._cond:
            self._check()
            if self._owner is not me:
                raise RuntimeError("release by a task that is not the owner")
            self._count -= 1
            if self._count == 0:
                self._owner = None
                self._cond.notify()
            return self._count

    def test(self) -> int:
        """Non-blocking acquire: the new count, or 0 if another task
        holds the lock."""
        me = core.current_context()
        with self._cond:
            self._check()
            if self._owner is me:
                self._count += 1
                return self._count
            if self._owner is None:
                self._owner = me
                self._count = 1
                return 1
            return 0

    def reinit(self):
        with self._cond:
            if self._owner is not None:
                raise RuntimeError("init of a held lock")
            self._count = 0
            self._alive = True

    def destroy(self):
        with self._cond:
            if self._owner is not None:
                raise RuntimeError("destroy of a held lock")
            self._alive = False


_LOCK_OPS = {
    "init": "reinit",
    "acquire": "acquire",
    "release": "release",
    "test": "test",
    "destroy": "destroy",
}


def lock_op(lock, op):
    """Uniform lock operation dispatch: init, acquire, release, test,
    destroy. Returns whatever the underlying operation returns (counts
    for nested locks, a bool for plain test)."""
    try:
        method = _LOCK_OPS[op]
    except KeyError:
        raise ValueError("unknown lock op %r" % (op,)) from None
    return getattr(lock, method)()
