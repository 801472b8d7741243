from hypothesis import HealthCheck, settings

# property suites run at least 10^3 randomized cases each
settings.register_profile("thorough", max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("thorough")

import pytest

_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """``report(n, ok, detail)`` records one criterion verdict for the summary."""

    def report(n, ok, detail):
        _ACCEPTANCE[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
