import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_acceptance: dict[str, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line detail for the acceptance summary: ``criterion("N = 3.00")``."""
    def note(detail: str) -> None:
        request.node.user_properties.append(("detail", detail))
    return note


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = "; ".join(v for k, v in report.user_properties if k == "detail")
        _acceptance[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        status, detail = _acceptance[name]
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
