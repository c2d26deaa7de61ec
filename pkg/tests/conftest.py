import pytest

from lostsales import CostParams, make_parametric_demand

# acceptance lines collected by tests/test_acceptance.py, printed at the end
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def geo09():
    return make_parametric_demand("geometric", rho=0.9)


@pytest.fixture(scope="session")
def geo05():
    return make_parametric_demand("geometric", rho=0.5)


@pytest.fixture(scope="session")
def two_point():
    return make_parametric_demand("two_point", values=[0, 2], probs=[0.5, 0.5])


@pytest.fixture(scope="session")
def expo():
    return make_parametric_demand("exponential", rate=1.0)


@pytest.fixture
def costs19():
    return CostParams(1.0, 9.0)
