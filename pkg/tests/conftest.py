import numpy as np
import pytest
from hypothesis import settings

from fdcmac import Scenario, load_manifest

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# acceptance checks append "criterion N: PASS/FAIL ..." lines here
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fig5():
    return load_manifest("fig5").scenario


@pytest.fixture(scope="session")
def default_scenario():
    return Scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
