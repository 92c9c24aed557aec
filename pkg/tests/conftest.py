import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(scope="session")
def unit_mesh4():
    from dg3d1d.mesh3d import build_box_mesh
    return build_box_mesh(4)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Lines appended here are printed, one per criterion, after the run."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)
