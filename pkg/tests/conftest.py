import numpy as np
import pytest

from synthforge.assembly import load_catalog
from synthforge.demo import box_mesh, write_demo_assembly
from synthforge.geometry import CameraIntrinsics

K640 = CameraIntrinsics(572.4, 572.4, 320.0, 240.0, 640, 480)


@pytest.fixture(scope="session")
def demo_root(tmp_path_factory):
    return write_demo_assembly(tmp_path_factory.mktemp("assembly"))


@pytest.fixture(scope="session")
def catalog(demo_root):
    return load_catalog(demo_root)


@pytest.fixture
def unit_cube():
    return box_mesh((1.0, 1.0, 1.0), name="cube")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
