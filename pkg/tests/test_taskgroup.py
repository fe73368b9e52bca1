"""Taskgroup joining and taskgroup reductions.

The reduction oracle is a serial left fold with the same combine over
the same values; with associative-commutative integer combines the
parallel result must match it exactly.
"""

import collections
import functools
import operator
import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskmp import core
from taskmp.core import (
    Cell,
    ReductionItem,
    barrier,
    create_task,
    current_team,
    parallel_region,
    reduction_finalize,
    reduction_private,
    task_wait,
    taskgroup,
)

WAIT = 20.0


def test_taskgroup_waits_direct_tasks(fresh_runtime):
    fresh_runtime(2)
    done = collections.deque()

    def body():
        for i in range(50):
            create_task(done.append, i)

    taskgroup(body)
    assert sorted(done) == list(range(50))


def test_taskgroup_waits_descendants(fresh_runtime):
    # a fire-and-forget grandchild holds the group open: it is created
    # inside the group (inherited), so the group end must wait for it
    fresh_runtime(2)
    flag = threading.Event()

    def grandchild():
        time.sleep(0.05)
        flag.set()

    taskgroup(lambda: create_task(lambda: create_task(grandchild)))
    assert flag.is_set()


def test_taskwait_does_not_wait_group_descendants(fresh_runtime):
    # contrast with the above: taskwait inside the group returns while
    # the blocked grandchild is still pending
    fresh_runtime(2)
    gate = threading.Event()
    gflag = threading.Event()

    def grandchild():
        gate.wait(WAIT)
        gflag.set()

    def body():
        create_task(lambda: create_task(grandchild))
        task_wait()
        assert not gflag.is_set()
        gate.set()

    taskgroup(body)
    assert gflag.is_set()


def test_taskgroup_quiescence(fresh_runtime):
    # when the group end returns, its tasks have left the team count
    fresh_runtime(4)

    def body():
        def spawn_many():
            for _ in range(200):
                create_task(lambda: create_task(lambda: None))

        taskgroup(spawn_many)
        assert current_team().task_latch.count == 0

    parallel_region(1, body)


def test_nested_taskgroups(fresh_runtime):
    fresh_runtime(2)
    events = collections.deque()

    def inner_body():
        create_task(events.append, "inner-task")

    def outer_body():
        create_task(events.append, "outer-task")
        taskgroup(inner_body)
        events.append("inner-closed")

    taskgroup(outer_body)
    assert events.index("inner-task") < events.index("inner-closed")
    assert sorted(events) == ["inner-closed", "inner-task", "outer-task"]


def test_empty_taskgroup(fresh_runtime):
    fresh_runtime(1)
    taskgroup(lambda: None)


def test_taskgroup_error_propagates(fresh_runtime):
    fresh_runtime(2)

    def bad():
        raise ValueError("grouped task failed")

    with pytest.raises(ValueError):
        taskgroup(lambda: create_task(bad))


# ------------------------------------------------------------ reductions


def test_sum_reduction(fresh_runtime):
    fresh_runtime(4)
    item = ReductionItem(init=lambda: 0, combine=operator.add)

    def body():
        for i in range(100):
            create_task(lambda i=i: _accumulate(item, i))

    def _accumulate(it, v):
        cell = reduction_private(it)
        cell.value += v

    taskgroup(body, reductions=[item])
    assert item.value == sum(range(100))


def test_reduction_folds_into_existing_target(fresh_runtime):
    fresh_runtime(2)
    item = ReductionItem(init=lambda: 0, combine=operator.add,
                         target=Cell(1000))

    def add_one():
        reduction_private(item).value += 1

    taskgroup(lambda: [create_task(add_one) for _ in range(10)],
              reductions=[item])
    assert item.value == 1010


def test_two_reductions_in_one_group(fresh_runtime):
    fresh_runtime(4)
    total = ReductionItem(init=lambda: 0, combine=operator.add)
    peak = ReductionItem(init=lambda: 0, combine=max)
    values = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5]

    def body():
        for v in values:
            def work(v=v):
                reduction_private(total).value += v
                cell = reduction_private(peak)
                if v > cell.value:
                    cell.value = v

            create_task(work)

    taskgroup(body, reductions=[total, peak])
    assert total.value == sum(values)
    assert peak.value == max(values)


def test_private_cell_stable_within_task(fresh_runtime):
    fresh_runtime(2)
    item = ReductionItem(init=lambda: 0, combine=operator.add)
    cells = collections.deque()

    def work():
        a = reduction_private(item)
        b = reduction_private(item)
        cells.append((id(a), id(b)))
        a.value += 1

    taskgroup(lambda: [create_task(work) for _ in range(8)],
              reductions=[item])
    assert all(x == y for x, y in cells)
    assert item.value == 8


def test_reduction_from_inner_group_task(fresh_runtime):
    # the declaring group is found through the lexical chain even when
    # the task sits in a nested group that declares nothing
    fresh_runtime(2)
    item = ReductionItem(init=lambda: 0, combine=operator.add)

    def outer():
        def inner():
            create_task(lambda: setattr(
                reduction_private(item), "value",
                reduction_private(item).value + 5))

        taskgroup(inner)

    taskgroup(outer, reductions=[item])
    assert item.value == 5


def test_reduction_private_without_declaration(fresh_runtime):
    fresh_runtime(1)
    item = ReductionItem(init=lambda: 0, combine=operator.add)
    errors = collections.deque()

    def work():
        try:
            reduction_private(item)
        except RuntimeError as e:
            errors.append(e)

    taskgroup(lambda: create_task(work))  # no reductions declared
    assert len(errors) == 1


def test_reduction_finalize_idempotent(fresh_runtime):
    fresh_runtime(2)
    item = ReductionItem(init=lambda: 0, combine=operator.add)
    groups = []

    def body():
        groups.append(core.current_context().taskgroup)
        for _ in range(5):
            create_task(lambda: setattr(
                reduction_private(item), "value",
                reduction_private(item).value + 1))

    taskgroup(body, reductions=[item])
    assert item.value == 5
    reduction_finalize(groups[0])  # second finalize must not re-merge
    assert item.value == 5


@given(values=st.lists(st.integers(-1000, 1000), max_size=60),
       workers=st.sampled_from([1, 2, 4]))
@settings(max_examples=25, deadline=None)
def test_reduction_matches_serial_fold(values, workers):
    core.stop(force=True)
    core.start(workers)
    try:
        for init, combine in [(lambda: 0, operator.add),
                              (lambda: 1, operator.mul)]:
            item = ReductionItem(init=init, combine=combine)

            def work(v):
                cell = reduction_private(item)
                cell.value = combine(cell.value, v)

            taskgroup(lambda: [create_task(work, v) for v in values],
                      reductions=[item])
            expect = functools.reduce(combine, values, init())
            assert item.value == expect
    finally:
        core.stop(force=True)


def test_group_tasks_still_join_team_barrier(fresh_runtime):
    fresh_runtime(2)
    done = collections.deque()

    def body():
        if core.current_context().member_index == 0:
            taskgroup(lambda: [create_task(done.append, i) for i in range(10)])
        barrier()
        assert len(done) == 10

    parallel_region(2, body)
