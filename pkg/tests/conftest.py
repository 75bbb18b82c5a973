import sys

import numpy as np
import pytest
from hypothesis import settings

from magtorus.assembly import magnetic_system
from magtorus.deformation import DEFAULT_DATA, ck_jet, evaluate_jet, liouville_initial_state
from magtorus.fields import Field2

settings.register_profile("magtorus", max_examples=40, deadline=None)
settings.load_profile("magtorus")


def random_field(rng, N, decay=0.6):
    """Random real band-``N`` field with geometrically decaying spectrum."""
    k = np.arange(-N, N + 1)
    scale = decay ** np.maximum.outer(np.abs(k), np.abs(k))
    c = (rng.standard_normal((2 * N + 1,) * 2) + 1j * rng.standard_normal((2 * N + 1,) * 2)) * scale
    return Field2(c)


@pytest.fixture(scope="session")
def default_jet():
    return ck_jet(liouville_initial_state(DEFAULT_DATA, 64), 12, 64)


@pytest.fixture(scope="session")
def default_state(default_jet):
    return evaluate_jet(default_jet, 0.01)


@pytest.fixture(scope="session")
def default_system(default_state):
    return magnetic_system(default_state)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
