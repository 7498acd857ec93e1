"""Shared fixtures, plus the verdict board for the gate criteria.

Each gate test reports exactly one PASS or FAIL line; the lines are held
until the end of the run and printed in a dedicated terminal section so
they survive output capture.
"""

import time
from contextlib import contextmanager

import pytest


def pytest_configure(config):
    config._gate_lines = []


class GateRecorder:
    def __init__(self, config):
        self._config = config

    @contextmanager
    def criterion(self, num, label, cap_seconds=None):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            self._line(num, label, "FAIL", time.perf_counter() - start,
                       cap_seconds, type(exc).__name__)
            raise
        elapsed = time.perf_counter() - start
        if cap_seconds is not None and elapsed > cap_seconds:
            self._line(num, label, "FAIL", elapsed, cap_seconds, "over time cap")
            pytest.fail(
                f"criterion {num} exceeded its runtime cap: "
                f"{elapsed:.1f}s > {cap_seconds:.0f}s"
            )
        self._line(num, label, "PASS", elapsed, cap_seconds, None)

    def _line(self, num, label, status, elapsed, cap, note):
        cap_text = f"cap {cap:.0f}s" if cap is not None else "no cap"
        tail = f"  ({note})" if note else ""
        self._config._gate_lines.append(
            f"criterion {num} [{label}]: {status}  {elapsed:.1f}s, {cap_text}{tail}"
        )


@pytest.fixture
def gate(request):
    return GateRecorder(request.config)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_gate_lines", [])
    if lines:
        terminalreporter.section("gate criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
