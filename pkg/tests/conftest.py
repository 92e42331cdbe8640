import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from qreadout import CellModel  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def narrow():
    return CellModel.gaussian(0.972, 0.001, 0.982, 0.001)


@pytest.fixture(scope="session")
def narrow_perfect():
    return CellModel.gaussian(0.972, 0.0, 0.982, 0.0)


@pytest.fixture(scope="session")
def broad():
    return CellModel.gaussian(0.966, 0.0025, 0.976, 0.0025)


@pytest.fixture(scope="session")
def asym():
    return CellModel.gaussian(0.925, 0.005, 0.965, 0.01)
