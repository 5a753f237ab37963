import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Print and remember one pass/fail line per acceptance criterion."""

    def _record(number: int, title: str, passed: bool, detail: str, seconds: float) -> None:
        line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'} [{seconds:6.1f}s] {title}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
