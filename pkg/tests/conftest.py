import pytest
from hypothesis import HealthCheck, settings

from drawlab import fixtures

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def wc2026():
    return fixtures.builtin("wc2026")


@pytest.fixture(scope="session")
def ex3():
    return fixtures.builtin("example3-random")


@pytest.fixture(scope="session")
def ex3_seated():
    return fixtures.builtin("example3-preassigned")


@pytest.fixture(scope="session")
def wc1990():
    return fixtures.builtin("wc1990")


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
