import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Record one acceptance criterion as a PASS/FAIL line for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number: int, checks: dict, detail: str = "") -> bool:
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        text = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}"
        if failed:
            text += " [failed: " + "; ".join(failed) + "]"
        if detail:
            text += " | " + detail
        lines[number] = text
        print(text)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
