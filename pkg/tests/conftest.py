import numpy as np
import pytest

from covdyn import geometry as geo
from covdyn import kinematics as kin


def stack(*parts):
    return np.stack(np.broadcast_arrays(*parts), axis=-1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sphere():
    return geo.sphere()


@pytest.fixture
def half_plane():
    return geo.half_plane()


@pytest.fixture
def grid1():
    return kin.BodyGrid(1, 33)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "SUMMARY_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
