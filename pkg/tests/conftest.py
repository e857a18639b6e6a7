import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from keps.grid import GridSpec
from keps.model import ModelParams

settings.register_profile(
    "keps",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("keps")


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def wall1d():
    return GridSpec.box(32)


@pytest.fixture
def wall2d():
    return GridSpec.box((16, 12), (1.0, 0.75))


@pytest.fixture
def periodic1d():
    return GridSpec.box(64, periodic=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def interior(arr, width=2):
    """Strip ``width`` nodes from both ends of every spatial axis of a scalar array."""
    return arr[tuple(slice(width, -width) for _ in range(arr.ndim))]


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip(":").split(".")[0]), s)):
            terminalreporter.write_line(line)
