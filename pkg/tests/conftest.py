import random
import time

import pytest
from hypothesis import HealthCheck, settings

from ppsauction.crypto import keygen

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []
_SESSION_START = time.perf_counter()


@pytest.fixture(scope="session")
def keys512():
    return keygen(512, random.Random("test-keys"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    terminalreporter.write_line(f"session wall time: {time.perf_counter() - _SESSION_START:.1f} s")
