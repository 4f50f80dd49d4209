"""Shared fixtures: one-time JIT warmup and the acceptance report.

Acceptance tests record a single PASS/FAIL line each through the
`report` fixture; the lines are printed in a dedicated section at the
end of the pytest run so the verdict of every criterion is visible even
when stdout capture is on.
"""

import pytest

from bayesgraph import _kernels

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    _kernels.warmup()


@pytest.fixture
def report():
    """report(criterion, ok, detail): record one pass/fail line, then
    assert."""

    def _report(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} — {detail}"
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
