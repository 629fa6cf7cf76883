import numpy as np
import pytest

from wentzell import build_interval_mesh, build_rectangle_mesh

_CRITERIA = {}


def record_criterion(number, passed, detail):
    _CRITERIA[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_interval():
    return build_interval_mesh(0.0, 1.0, 16, 1.0, 0.0)


@pytest.fixture
def unit_square():
    return build_rectangle_mesh(1.0, 1.0, 6, 6, 1.0, 0.0)
