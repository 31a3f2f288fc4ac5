import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# (criterion, passed, message) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, msg in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {msg}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
