import numpy as np
import pytest

from pelastica.generators import circle, ellipse, fourier


@pytest.fixture
def unit_circle():
    return circle(256, 1.0)


@pytest.fixture
def ellipse21():
    return ellipse(256, 2.0, 1.0)


@pytest.fixture
def wobbly():
    """A smooth non-symmetric planar curve that N = 256 resolves well."""
    return fourier(256, seed=3, modes=5, amp=0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number, title, passed, detail):
        ACCEPTANCE_LINES.append((number, f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
