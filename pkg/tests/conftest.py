import numpy as np
import pytest

from wallflow.gas import GasLaw
from wallflow.geometry import WallShape
from wallflow.solver import make_setup, picard_solve
from wallflow.upstream import Cutoff, UpstreamProfile


@pytest.fixture(scope="session")
def gas2():
    return GasLaw(2.0)


@pytest.fixture(scope="session")
def gas14():
    return GasLaw(1.4)


@pytest.fixture(scope="session")
def convex_profile():
    return UpstreamProfile.convex_decay(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def constant_profile():
    return UpstreamProfile.constant(1.0)


@pytest.fixture(scope="session")
def wide_cutoff():
    # thresholds (0.875, 0.9375, 0.90625): inactive for the standard cases
    return Cutoff.from_eps(1.0 / 16.0)


@pytest.fixture(scope="session")
def small_bump_state(gas2, convex_profile, wide_cutoff):
    """Standard bump case on a small mesh, shared by solver/diagnostics tests."""
    setup = make_setup(gas2, convex_profile, WallShape.smooth_bump(0.05),
                       8.0, 10.0, 8.0, 128, 64, cutoff=wide_cutoff)
    state, report = picard_solve(setup)
    return state, report
