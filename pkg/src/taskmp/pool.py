"""Worker pool, completion handles, and per-task context slots.

Tasks are plain callables queued on per-worker deques (LIFO for the
owner, FIFO for thieves) plus one inject queue for spawns from
non-worker threads. Execution is exactly-once; a spawned task may be
gated on a CompletionHandle and is enqueued only when the gate fires.

Progress under blocking: a worker that blocks in a latch operation
first tries to run ready tasks from its own deque inline, but only
tasks the enclosing wait is actually waiting for (the semantic layer
scopes this with a predicate; running anything else inline could bury
a frame that other tasks need resumed). When it cannot help, it parks
and the pool wakes or starts a spare worker so the number of runnable
workers never drops below num_workers. Spare workers retire back into
a free list at task boundaries once the blocked workers resume.
"""

import collections
import random
import sys
import threading

from taskmp.latch import Latch, get_progress_hook, set_progress_hook

__all__ = [
    "CompletionHandle",
    "WorkerPool",
    "when_all",
    "pool_start",
    "pool_shutdown",
    "spawn",
    "context_get",
    "context_set",
    "current_task",
]

_tls = threading.local()

_MAX_INLINE_DEPTH = 48


class CompletionHandle:
    """One-shot readiness signal for a spawned task.

    Transitions pending -> complete exactly once; complete is absorbing.
    Callbacks registered after completion fire immediately, on the
    registering thread. Shareable between any number of dependents.
    """

    __slots__ = ("_lock", "_done", "_error", "_callbacks", "_cond")

    def __init__(self):
        self._lock = threading.Lock()
        self._done = False
        self._error = None
        self._callbacks = []
        self._cond = None

    @property
    def done(self) -> bool:
        return self._done

    @property
    def error(self):
        """Exception raised by the task body, if any."""
        return self._error

    def add_done_callback(self, fn) -> None:
        with self._lock:
            if not self._done:
                self._callbacks.append(fn)
                return
        fn(self)

    def wait(self, timeout=None) -> bool:
        """Block until complete. Returns False on timeout."""
        hook = get_progress_hook()
        with self._lock:
            if self._done:
                return True
            if self._cond is None:
                self._cond = threading.Condition(self._lock)
            if hook is not None:
                hook.on_block()
            try:
                return self._cond.wait_for(lambda: self._done, timeout)
            finally:
                if hook is not None:
                    hook.on_unblock()

    def _complete(self, error=None) -> None:
        with self._lock:
            if self._done:
                raise RuntimeError("completion handle completed twice")
            self._done = True
            self._error = error
            callbacks, self._callbacks = self._callbacks, []
            if self._cond is not None:
                self._cond.notify_all()
        for fn in callbacks:
            fn(self)


def when_all(handles) -> CompletionHandle:
    """Handle that completes once every input handle has completed.

    An empty collection yields an already-complete handle. Duplicate
    inputs are counted per occurrence.
    """
    handles = list(handles)
    result = CompletionHandle()
    if not handles:
        result._complete()
        return result
    lock = threading.Lock()
    remaining = [len(handles)]

    def one_done(_h):
        with lock:
            remaining[0] -= 1
            last = remaining[0] == 0
        if last:
            result._complete()

    for h in handles:
        h.add_done_callback(one_done)
    return result


class Task:
    __slots__ = ("fn", "args", "slot", "handle", "exclusive")

    def __init__(self, fn, args, slot, exclusive):
        self.fn = fn
        self.args = args
        self.slot = slot
        self.handle = CompletionHandle()
        self.exclusive = exclusive


def current_task():
    return getattr(_tls, "task", None)


def context_get():
    """Context value of the currently executing task.

    Outside any task this returns the calling thread's standalone slot
    (None until context_set is called there); the semantic layer maps
    that to its initial-task context.
    """
    task = getattr(_tls, "task", None)
    if task is not None:
        return task.slot
    return getattr(_tls, "external_slot", None)


def context_set(value) -> None:
    task = getattr(_tls, "task", None)
    if task is not None:
        task.slot = value
    else:
        _tls.external_slot = value


class _Worker:
    """One pool thread. Doubles as the latch progress hook."""

    def __init__(self, pool, index, spare):
        self.pool = pool
        self.index = index
        self.spare = spare
        self.deque = collections.deque()
        self.rng = random.Random(0x9E3779B1 * (index + 1))
        self.inline_depth = 0
        self.help_scopes = []
        self.unpark = threading.Event()
        name = "taskmp-%s%d" % ("s" if spare else "w", index)
        self.thread = threading.Thread(target=self._run, name=name, daemon=True)

    # ------------------------------------------------------ hook interface

    def help_one(self) -> bool:
        # Run at most one task from our own deque inline, and only one
        # the current wait scope declares safe (a task this wait is
        # waiting for). Anything else must run on another thread.
        if not self.help_scopes or self.inline_depth >= _MAX_INLINE_DEPTH:
            return False
        pred = self.help_scopes[-1]
        try:
            task = self.deque.pop()
        except IndexError:
            return False
        if task.exclusive or not pred(task):
            self.deque.append(task)  # leave it for thieves
            return False
        self._execute(task, inline=True)
        return True

    def on_block(self):
        self.pool._on_block()

    def on_unblock(self):
        self.pool._on_unblock()

    # ------------------------------------------------------ execution

    def _execute(self, task, inline=False):
        prev = getattr(_tls, "task", None)
        _tls.task = task
        if inline:
            self.inline_depth += 1
        error = None
        try:
            try:
                task.fn(*task.args)
            except BaseException as e:  # kept on the handle, see core joins
                error = e
        finally:
            _tls.task = prev
            if inline:
                self.inline_depth -= 1
        task.handle._complete(error)
        self.pool._outstanding.count_down(1)

    def _poll_once(self):
        try:
            return self.deque.pop()
        except IndexError:
            pass
        try:
            return self.pool._inject.popleft()
        except IndexError:
            pass
        return self._steal()

    def _steal(self):
        workers = self.pool._workers
        n = len(workers)
        if n <= 1:
            return None
        start = self.rng.randrange(n)
        for k in range(n):
            victim = workers[(start + k) % n]
            if victim is self:
                continue
            try:
                return victim.deque.popleft()
            except IndexError:
                continue
        return None

    def _run(self):
        set_progress_hook(self)
        try:
            while self._step():
                pass
        finally:
            set_progress_hook(None)

    def _step(self) -> bool:
        pool = self.pool
        task = self._poll_once()
        if task is None:
            # read the work sequence, rescan once, then sleep on it
            with pool._mu:
                if pool._stop:
                    return False
                seq = pool._work_seq
            task = self._poll_once()
        if task is not None:
            self._execute(task)
            return self._maybe_retire()
        parked = False
        with pool._mu:
            if pool._stop:
                return False
            if self.spare and pool._active > pool.num_workers:
                pool._active -= 1
                pool._free.append(self)
                parked = True
            elif pool._work_seq == seq:
                pool._idle += 1
                pool._mu.wait(0.05)
                pool._idle -= 1
        if parked:
            self.unpark.wait()
            self.unpark.clear()
            return not pool._stop
        return True

    def _maybe_retire(self) -> bool:
        # surplus spares park between tasks; resident workers never do
        pool = self.pool
        if not self.spare:
            return True
        with pool._mu:
            if pool._stop:
                return False
            if pool._active <= pool.num_workers:
                return True
            pool._active -= 1
            pool._free.append(self)
        self.unpark.wait()
        self.unpark.clear()
        return not self.pool._stop


class WorkerPool:
    """Fixed-width pool of task workers with temporary growth.

    num_workers is fixed at start; the pool keeps that many workers
    runnable, temporarily starting spares while workers are blocked in
    latch waits. Every spawned task runs exactly once. shutdown() waits
    for quiescence, then joins all threads; it is idempotent.
    """

    def __init__(self, num_workers: int):
        if num_workers < 1:
            raise ValueError("num_workers must be >= 1, got %d" % num_workers)
        self.num_workers = num_workers
        self._mu = threading.Condition()
        self._inject = collections.deque()
        self._outstanding = Latch(0)
        self._closed = False
        self._stop = False
        self._work_seq = 0
        self._idle = 0
        self._active = num_workers
        self._free = []
        self._total = num_workers
        self._max_threads = max(256, num_workers * 8)
        if sys.getrecursionlimit() < 10000:
            sys.setrecursionlimit(10000)
        workers = [_Worker(self, i, spare=False) for i in range(num_workers)]
        self._workers = workers  # replaced copy-on-write when spares join
        for w in workers:
            w.thread.start()

    # ------------------------------------------------------ spawning

    def spawn(self, body, gate=None, context=None, *, args=(), exclusive=False):
        """Queue `body(*args)` as one task; returns its CompletionHandle.

        The task runs only after `gate` (if given) completes. The handle
        completes after the body returns, including any bookkeeping the
        caller wrapped around it. While the pool is draining in
        shutdown(), tasks may still spawn continuations; new work from
        outside the pool is rejected once shutdown began.
        """
        if self._closed:
            hook = get_progress_hook()
            from_worker = isinstance(hook, _Worker) and hook.pool is self
            if self._stop or not from_worker:
                raise RuntimeError("spawn after pool shutdown")
        self._outstanding.count_up(1)
        task = Task(body, args, context, exclusive)
        if gate is None or gate.done:
            self._enqueue(task)
        else:
            gate.add_done_callback(lambda _h: self._enqueue(task))
        return task.handle

    def _enqueue(self, task):
        hook = get_progress_hook()
        if isinstance(hook, _Worker) and hook.pool is self:
            hook.deque.append(task)
        else:
            self._inject.append(task)
        with self._mu:
            self._work_seq += 1
            if self._idle:
                self._mu.notify()

    # ------------------------------------------------------ blocking hooks

    def _on_block(self):
        with self._mu:
            self._active -= 1
            if self._active < self.num_workers and not self._stop:
                self._grow_locked()

    def _on_unblock(self):
        with self._mu:
            self._active += 1

    def _grow_locked(self):
        if self._free:
            w = self._free.pop()
            self._active += 1
            w.unpark.set()
            return
        if self._total >= self._max_threads:
            raise RuntimeError(
                "pool grew to %d threads; runaway blocking suspected"
                % self._total
            )
        w = _Worker(self, self._total, spare=True)
        self._total += 1
        self._active += 1
        self._workers = self._workers + [w]
        w.thread.start()

    # ------------------------------------------------------ shutdown

    def shutdown(self):
        """Wait for all spawned tasks, then stop and join every worker."""
        hook = get_progress_hook()
        if isinstance(hook, _Worker) and hook.pool is self:
            raise RuntimeError("cannot shut down a pool from its own worker")
        with self._mu:
            self._closed = True
        self._outstanding.wait()
        with self._mu:
            self._stop = True
            workers = list(self._workers)
            self._free.clear()
            self._mu.notify_all()
        for w in workers:
            w.unpark.set()
        for w in workers:
            w.thread.join()

    @property
    def alive(self) -> bool:
        return not self._stop

    def __repr__(self):
        return "WorkerPool(num_workers=%d, threads=%d)" % (
            self.num_workers,
            self._total,
        )


def pool_start(num_workers: int) -> WorkerPool:
    return WorkerPool(num_workers)


def pool_shutdown(pool: WorkerPool) -> None:
    pool.shutdown()


def spawn(pool, body, gate=None, context=None, *, args=(), exclusive=False):
    return pool.spawn(body, gate, context, args=args, exclusive=exclusive)


class help_scope:
    """Scope in which the calling worker may run matching tasks inline.

    While a latch wait blocks inside the scope, the worker offers its
    own queued tasks to `pred(task)`; only tasks the wait is known to
    be waiting for may run on this stack (anything else could bury a
    frame the rest of the program needs resumed). No-op on non-worker
    threads.
    """

    __slots__ = ("_pred", "_worker")

    def __init__(self, pred):
        self._pred = pred
        self._worker = None

    def __enter__(self):
        hook = get_progress_hook()
        if isinstance(hook, _Worker):
            self._worker = hook
            hook.help_scopes.append(self._pred)
        return self

    def __exit__(self, *exc):
        if self._worker is not None:
            self._worker.help_scopes.pop()
            self._worker = None
        return False
