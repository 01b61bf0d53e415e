import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fixture_records():
    from wristsim.core_types import load_fixture

    return load_fixture()


_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one test per acceptance criterion")


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA[name] = ("PASS" if report.passed else "FAIL", report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    from test_acceptance import __dict__ as ns

    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        status, _ = _CRITERIA[name]
        number = int(name.split("_")[2])
        doc = (ns[name].__doc__ or "").strip().splitlines()[0]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {doc}")
