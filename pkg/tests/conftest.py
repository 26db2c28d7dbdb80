import math

import numpy as np
import pytest

from smanakov.field import Grid1D


@pytest.fixture
def grid256():
    return Grid1D(20 * math.pi, 256)


@pytest.fixture
def fd_grid():
    return Grid1D(20.0, 400, "dirichlet")


def random_values(rng, grid, scale=1.0):
    shape = (2, grid.size)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def smooth_values(grid, width=2.0):
    x = grid.x
    env = np.exp(-(x / width) ** 2)
    return np.stack([env * np.exp(0.3j * x), 0.5 * env * np.exp(-0.2j * x)])


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
