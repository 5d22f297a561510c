import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def line4():
    """1-D points {0, 1, 10, 11} with classes {0,1} and {10,11}."""
    from kmeanslab import Dataset

    return Dataset(np.array([[0.0], [1.0], [10.0], [11.0]]), np.array([0, 0, 1, 1]))


@pytest.fixture
def criterion(request):
    """Record one acceptance outcome; a summary line is printed at session end."""
    log = request.config.__dict__.setdefault("_acceptance", [])

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
        log.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.__dict__.get("_acceptance")
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log):
            terminalreporter.write_line(line)
