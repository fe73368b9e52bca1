"""Latch semantics: counting, release-at-zero, reuse, interleavings."""

import threading
import time

import pytest
from hypothesis import given, settings, strategies as st

from taskmp.latch import Latch


def join_all(threads, timeout=10.0):
    deadline = time.monotonic() + timeout
    for t in threads:
        t.join(max(0.0, deadline - time.monotonic()))
        assert not t.is_alive(), "thread did not finish in time (deadlock?)"


def spin_until(pred, timeout=5.0):
    deadline = time.monotonic() + timeout
    while not pred():
        if time.monotonic() > deadline:
            raise AssertionError("condition not reached in time")
        time.sleep(0.0005)


# ---------------------------------------------------------------- basics

def test_new_zero_is_ready_and_wait_returns():
    l = Latch(0)
    assert l.is_ready()
    l.wait()  # must not block


def test_new_negative_rejected():
    with pytest.raises(ValueError):
        Latch(-1)


def test_count_down_partial_not_ready():
    l = Latch(3)
    l.count_down(2)
    assert not l.is_ready()
    assert l.count == 1


def test_count_down_to_zero_ready():
    l = Latch(1)
    l.count_down(1)
    assert l.is_ready()


def test_count_down_underflow_fails_fast():
    l = Latch(1)
    with pytest.raises(RuntimeError):
        l.count_down(2)
    # state unchanged by the failed call
    assert l.count == 1


def test_count_args_validated():
    l = Latch(1)
    with pytest.raises(ValueError):
        l.count_up(0)
    with pytest.raises(ValueError):
        l.count_down(0)


def test_count_up_from_zero_allowed():
    l = Latch(0)
    l.count_up(1)
    assert not l.is_ready()
    l.count_down(1)
    assert l.is_ready()


def test_up_two_down_one_twice():
    l = Latch(0)
    l.count_up(2)
    l.count_down(1)
    l.count_down(1)
    assert l.is_ready()


def test_count_down_and_wait_last_caller_no_block():
    l = Latch(1)
    l.count_down_and_wait()  # 1 -> 0, returns immediately
    assert l.is_ready()


# ------------------------------------------------------ blocking behaviour

def test_wait_blocks_until_release():
    l = Latch(1)
    done = []

    def waiter():
        l.wait()
        done.append(1)

    t = threading.Thread(target=waiter)
    t.start()
    spin_until(lambda: l.waiters == 1)
    assert not done
    l.count_down(1)
    join_all([t])
    assert done == [1]


def test_four_children_release_parent():
    # scripted 4-worker interleaving: each child counts down once,
    # parent's wait returns only after the last one
    l = Latch(4)
    order = []
    lock = threading.Lock()

    def child(i):
        time.sleep(0.001 * i)
        with lock:
            order.append(i)
        l.count_down(1)

    threads = [threading.Thread(target=child, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    l.wait()
    assert l.is_ready()
    join_all(threads)
    assert sorted(order) == [0, 1, 2, 3]


def test_parent_plus_children_protocol():
    # fork-join accounting: latch armed at n+1, n children count_down,
    # parent count_down_and_wait blocks until all have finished
    n = 4
    l = Latch(n + 1)
    finished = []

    def child(i):
        time.sleep(0.002)
        finished.append(i)
        l.count_down(1)

    threads = [threading.Thread(target=child, args=(i,)) for i in range(n)]
    for t in threads:
        t.start()
    l.count_down_and_wait()
    assert len(finished) == n
    join_all(threads)


def test_momentary_zero_releases_waiter_despite_count_up():
    # a waiter present during a transition to zero is released even if
    # the counter immediately rises again
    l = Latch(1)
    released = []

    def waiter():
        l.wait()
        released.append(1)

    t = threading.Thread(target=waiter)
    t.start()
    spin_until(lambda: l.waiters == 1)
    l.count_down(1)
    l.count_up(1)  # counter is 1 again, but the release already happened
    join_all([t])
    assert released == [1]
    assert l.count == 1


def test_late_waiter_after_count_up_blocks():
    # a wait that starts after the counter rose again does block
    l = Latch(1)
    l.count_down(1)
    l.count_up(1)
    got = []

    def waiter():
        l.wait()
        got.append(1)

    t = threading.Thread(target=waiter)
    t.start()
    spin_until(lambda: l.waiters == 1)
    assert not got
    l.count_down(1)
    join_all([t])
    assert got == [1]


# ------------------------------------------------------------------ reset

def test_reset_changes_counter_and_generation():
    l = Latch(0)
    g0 = l.generation
    l.reset(1)
    assert l.count == 1
    assert l.generation == g0 + 1


def test_reset_to_zero_then_wait_immediate():
    l = Latch(5)
    l.reset(0)
    l.wait()


def test_reset_with_live_waiters_rejected():
    l = Latch(1)
    t = threading.Thread(target=l.wait)
    t.start()
    spin_until(lambda: l.waiters == 1)
    with pytest.raises(RuntimeError):
        l.reset(3)
    l.count_down(1)
    join_all([t])


def test_reuse_cycle_two_rounds():
    # reuse after a completed round, like consecutive barrier rounds
    l = Latch(1)
    for _ in range(2):
        done = []

        def waiter():
            l.wait()
            done.append(1)

        t = threading.Thread(target=waiter)
        t.start()
        spin_until(lambda: l.waiters == 1)
        l.count_down(1)
        join_all([t])
        assert done == [1]
        l.reset(1)
    assert l.count == 1


def test_reset_negative_rejected():
    l = Latch(0)
    with pytest.raises(ValueError):
        l.reset(-2)


# ------------------------------------------------------------- properties

@given(
    start=st.integers(min_value=0, max_value=50),
    ops=st.lists(
        st.tuples(st.sampled_from(["up", "down"]), st.integers(min_value=1, max_value=5)),
        max_size=60,
    ),
)
@settings(max_examples=200, deadline=None)
def test_serial_counter_matches_fold(start, ops):
    # linearizable counter: applied serially, the final counter equals
    # start + sum(ups) - sum(accepted downs); underflow attempts raise
    # and leave the counter unchanged
    l = Latch(start)
    expect = start
    for kind, n in ops:
        if kind == "up":
            l.count_up(n)
            expect += n
        else:
            if n > expect:
                with pytest.raises(RuntimeError):
                    l.count_down(n)
            else:
                l.count_down(n)
                expect -= n
        assert l.count == expect
        assert l.count >= 0
        assert l.is_ready() == (expect == 0)


def test_no_lost_wakeups_many_waiters():
    # W waiters, W matching count_downs from other threads: all return
    w = 8
    l = Latch(w)
    returned = []
    lock = threading.Lock()

    def waiter(i):
        l.wait()
        with lock:
            returned.append(i)

    waiters = [threading.Thread(target=waiter, args=(i,)) for i in range(w)]
    for t in waiters:
        t.start()
    spin_until(lambda: l.waiters == w)
    downers = [threading.Thread(target=l.count_down, args=(1,)) for _ in range(w)]
    for t in downers:
        t.start()
    join_all(waiters + downers)
    assert sorted(returned) == list(range(w))


def test_concurrent_up_down_never_negative():
    # paired up/down traffic from several threads; sampled counter stays
    # nonnegative and ends at zero
    l = Latch(0)
    n_threads, rounds = 4, 2000
    samples = []
    stop = threading.Event()

    def churn():
        for _ in range(rounds):
            l.count_up(1)
            l.count_down(1)

    def sampler():
        while not stop.is_set():
            samples.append(l.count)

    threads = [threading.Thread(target=churn) for _ in range(n_threads)]
    s = threading.Thread(target=sampler)
    s.start()
    for t in threads:
        t.start()
    join_all(threads, timeout=30.0)
    stop.set()
    join_all([s])
    assert min(samples) >= 0
    assert l.count == 0
