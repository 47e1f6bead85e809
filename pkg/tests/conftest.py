import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from seqate.experiment import AssignmentTrace  # noqa: E402


def make_trace(p, k, y):
    return AssignmentTrace(np.asarray(p, dtype=float), np.asarray(k), np.asarray(y, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


from acceptance_log import LINES as ACCEPTANCE_LINES  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
