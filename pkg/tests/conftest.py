import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsgain.spectral_core import GridSpec, random_solenoidal

settings.register_profile(
    "nsgain",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("nsgain")


@pytest.fixture
def grid32():
    return GridSpec(32, nu=0.1)


@pytest.fixture
def rough_field(grid32):
    return random_solenoidal(grid32, slope=1.5, seed=7)


def rel(a, b):
    """Relative difference with a floor on the scale."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
