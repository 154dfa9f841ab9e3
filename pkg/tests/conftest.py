import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "xsdr", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("xsdr")

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
