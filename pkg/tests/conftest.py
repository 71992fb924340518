"""Shared fixtures and the acceptance-criteria reporter.

Acceptance tests record one line per criterion through the ``criterion``
fixture; the lines are printed in a dedicated section of the terminal
summary so the pass/fail verdicts survive output capturing.
"""

from __future__ import annotations

import numpy as np
import pytest

from tacosim import example2_fixture

_CRITERION_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(num: int, name: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        line = f"criterion {num:02d} {name}: {status}"
        if detail:
            line += f" ({detail})"
        _CRITERION_LINES.append(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERION_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def fixture_problem():
    return example2_fixture()


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
