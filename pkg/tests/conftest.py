import os

# single-threaded BLAS; must happen before numpy is imported anywhere
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from pffloc.distance_field import build
from pffloc.simulator import generate_world


@pytest.fixture(scope="session")
def room_world():
    return generate_world(3, "room", density=40.0)


@pytest.fixture(scope="session")
def room_field(room_world):
    return build(room_world.map_points, 0.1, margin=1.0)


@pytest.fixture(scope="session")
def room_field_fine(room_world):
    return build(room_world.map_points, 0.05, margin=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture(scope="session")
def criterion_log(request):
    """Call with (number, passed, detail); lines are echoed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
