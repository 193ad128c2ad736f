import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def scan_pair():
    """The default locking scan run twice in exhaustive mode."""
    from fptm.scan import run_scan
    import time
    t0 = time.monotonic()
    first = run_scan({"exhaustive": True})
    elapsed = time.monotonic() - t0
    second = run_scan({"exhaustive": True})
    return first, second, elapsed


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines (CRITERION n: PASS/FAIL ...) at the end of the run."""
    lines = []
    for mod in list(sys.modules.values()):
        lines.extend(getattr(mod, "ACCEPTANCE_LINES", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines), key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
