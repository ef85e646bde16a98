import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dialogpomdp.dialogue import build_dialogue_model
from dialogpomdp.model import tiger85

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tiger():
    return tiger85()


@pytest.fixture(scope="session")
def dialogue():
    return build_dialogue_model("standard")


def simplex_points(rng, n, dim):
    return rng.dirichlet(np.ones(dim), size=n)


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.acceptance_lines
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture
def criterion(request):
    """``record(n, ok, detail)`` stores the one-line verdict printed in the summary."""
    def record(n, ok, detail=""):
        verdict = "PASS" if ok else "FAIL"
        request.config.acceptance_lines[n] = f"criterion {n:>2}: {verdict}  {detail}".rstrip()
        return ok
    return record
