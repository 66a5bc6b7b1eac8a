import numpy as np
import pytest

from posh.environment import GridSpec, Obstacle, compute_sdf


def central_diff(f, x, h=1e-6):
    """Jacobian of ``f`` at ``x`` by central differences (rows: outputs)."""
    x = np.asarray(x, dtype=float)
    y0 = np.atleast_1d(f(x))
    J = np.zeros((y0.size, x.size))
    for k in range(x.size):
        dx = np.zeros_like(x)
        dx[k] = h
        J[:, k] = (np.atleast_1d(f(x + dx)) - np.atleast_1d(f(x - dx))) / (2 * h)
    return J


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), floor))


@pytest.fixture
def small_grid():
    return GridSpec((0.0, 0.0), 0.1, (101, 101))


@pytest.fixture
def box_sdf(small_grid):
    return compute_sdf([Obstacle((5.0, 5.0), (1.0, 1.0), id=0)], small_grid)


ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    """Remember one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
    print(ACCEPTANCE_LINES[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
