import pytest
from hypothesis import settings

from helpers import running_scenario, running_table as _running_table

# fixed example streams keep the suite reproducible run to run
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")


@pytest.fixture
def running_table():
    return _running_table()


@pytest.fixture
def running():
    return _running_table(), running_scenario()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
