"""Countable latch: the runtime's sole blocking primitive.

A latch holds a nonnegative counter. Callers block in wait-style
operations until the counter reaches zero, at which point every
current waiter is released. Unlike a one-shot latch the counter may
be counted back up while outstanding work grows, so the latch acts
as a dynamic outstanding-work counter. A waiter present during a
momentary zero is released even if the counter rises again before
the waiter gets scheduled; this is tracked with a release epoch.

Blocking operations cooperate with the worker pool through a
per-thread progress hook (see `set_progress_hook`): before a caller
parks it may run ready tasks inline, and while parked the pool is
told so it can keep enough threads runnable. On threads without a
hook the latch is a plain condition-variable latch.
"""

import threading

__all__ = ["Latch", "set_progress_hook", "get_progress_hook"]

_tls = threading.local()


def set_progress_hook(hook):
    """Install `hook` as the calling thread's progress provider.

    The hook must expose ``help_one() -> bool`` (run at most one safe
    ready task inline, return whether one ran), ``on_block()`` and
    ``on_unblock()``. Pass None to uninstall. Worker threads of a pool
    install their hook at startup; other threads need none.
    """
    _tls.hook = hook


def get_progress_hook():
    return getattr(_tls, "hook", None)


class Latch:
    """Counter-based blocker releasing all waiters at zero.

    The counter never goes negative: a count_down past zero raises
    RuntimeError rather than wrapping, since it means the caller's
    accounting is broken. reset() requires that nobody is blocked.
    """

    def __init__(self, count: int = 0):
        if count < 0:
            raise ValueError("latch count must be >= 0, got %d" % count)
        self._cond = threading.Condition()
        self._counter = count
        self._waiters = 0
        self._generation = 0
        # bumped on every transition to zero; lets a waiter detect a
        # release that happened while it was off the lock
        self._epoch = 0

    @property
    def count(self) -> int:
        """Instantaneous counter value (unsynchronized peek)."""
        return self._counter

    @property
    def waiters(self) -> int:
        return self._waiters

    @property
    def generation(self) -> int:
        return self._generation

    def count_up(self, n: int = 1) -> None:
        if n < 1:
            raise ValueError("count_up requires n >= 1")
        with self._cond:
            self._counter += n

    def count_down(self, n: int = 1) -> None:
        if n < 1:
            raise ValueError("count_down requires n >= 1")
        with self._cond:
            self._decrement(n)

    def _decrement(self, n):
        # caller holds self._cond
        if n > self._counter:
            raise RuntimeError(
                "latch underflow: count_down(%d) with counter %d"
                % (n, self._counter)
            )
        self._counter -= n
        if self._counter == 0:
            self._epoch += 1
            self._cond.notify_all()

    def is_ready(self) -> bool:
        return self._counter == 0

    def wait(self) -> None:
        """Block until the counter is (or momentarily was) zero."""
        with self._cond:
            if self._counter == 0:
                return
            epoch = self._epoch
        self._block(epoch)

    def count_down_and_wait(self) -> None:
        """count_down(1), then wait; blocks iff the decrement did not reach 0."""
        with self._cond:
            self._decrement(1)
            if self._counter == 0:
                return
            epoch = self._epoch
        self._block(epoch)

    def _block(self, epoch):
        # Released when the counter hits zero after `epoch` was read.
        hook = get_progress_hook()
        while True:
            if hook is not None and hook.help_one():
                # ran a task inline; it may have released us
                with self._cond:
                    if self._counter == 0 or self._epoch != epoch:
                        return
                continue
            with self._cond:
                if self._counter == 0 or self._epoch != epoch:
                    return
                self._waiters += 1
                if hook is not None:
                    hook.on_block()
                try:
                    while self._counter != 0 and self._epoch == epoch:
                        self._cond.wait()
                finally:
                    self._waiters -= 1
                    if hook is not None:
                        hook.on_unblock()
                return

    def reset(self, count: int) -> None:
        """Rearm to `count`. Only legal with no blocked callers."""
        if count < 0:
            raise ValueError("latch count must be >= 0, got %d" % count)
        with self._cond:
            if self._waiters:
                raise RuntimeError(
                    "reset with %d live waiter(s) is a contract violation"
                    % self._waiters
                )
            self._counter = count
            self._generation += 1

    def __repr__(self):
        return "Latch(count=%d, waiters=%d, generation=%d)" % (
            self._counter,
            self._waiters,
            self._generation,
        )
