import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bcm import ModelParams  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def table1a():
    """Table 1.a first row: N=4, lambda=0.001, mu1=0.1, mu2=0.01, p=0.8."""
    return ModelParams.exponential(4, 0.001, 0.1, 0.01, 0.8)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
