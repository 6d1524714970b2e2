import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sharpfront import ReactionSpec, reconstruct_profile, solve_speed

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def cubic():
    return ReactionSpec.cubic(0.75)


@pytest.fixture(scope="session")
def holder():
    return ReactionSpec.holder(0.75, 0.5, 0.5)


@pytest.fixture(scope="session")
def cubic_speed(cubic):
    return solve_speed(cubic)


@pytest.fixture(scope="session")
def holder_speed(holder):
    return solve_speed(holder)


@pytest.fixture(scope="session")
def cubic_profile(cubic, cubic_speed):
    return reconstruct_profile(cubic, cubic_speed)


@pytest.fixture(scope="session")
def holder_profile(holder, holder_speed):
    return reconstruct_profile(holder, holder_speed)


def logistic(z, s0=0.75):
    """Closed-form cubic wave with ``U(0) = s0``."""
    a = (1.0 - s0) / s0
    return 1.0 / (1.0 + a * np.exp(-np.asarray(z) / np.sqrt(2.0)))
