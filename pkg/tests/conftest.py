import os

# Pin BLAS backends to one thread before numpy loads anywhere, so the
# only parallelism in timed kernels is the runtime's own.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(_var, "1")

import pytest  # noqa: E402


@pytest.fixture(autouse=True)
def _runtime_cleanup():
    # Stop any runtime a test left behind so worker threads never leak
    # across tests.
    yield
    from taskmp import core

    core.stop(force=True)


@pytest.fixture
def fresh_runtime():
    from taskmp import core

    core.stop(force=True)

    def _start(workers):
        core.stop(force=True)
        return core.start(workers)

    yield _start
    core.stop(force=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # One verdict line per acceptance criterion, recovered from the test
    # reports so the lines survive output capture.
    marker = "test_acceptance.py::test_criterion_"
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            if marker not in rep.nodeid:
                continue
            slug = rep.nodeid.split("::test_criterion_", 1)[1]
            num, _, title = slug.partition("_")
            if outcome == "skipped":
                reason = ""
                if isinstance(rep.longrepr, tuple):
                    reason = " (%s)" % rep.longrepr[2].replace("Skipped: ", "")
                lines.append((num, "[criterion %s] SKIP %s%s"
                              % (num, title.replace("_", " "), reason)))
            else:
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines.append((num, "[criterion %s] %s (%.1fs) %s"
                              % (num, verdict, rep.duration,
                                 title.replace("_", " "))))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(lines):
            terminalreporter.line(text)
