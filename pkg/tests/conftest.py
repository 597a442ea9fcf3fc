import numpy as np
import pytest

from oldroyd_decay.spectral import build_grid, dealias, leray_project, to_spectral
from oldroyd_decay.state import SpectralState


def random_state(grid, seed=0, amplitude=1.0, time=0.0):
    """Real, divergence-free, dealiased state built from random physical fields."""
    rng = np.random.default_rng(seed)
    u = to_spectral(rng.standard_normal((2,) + grid.shape), grid)
    tau = to_spectral(rng.standard_normal((3,) + grid.shape), grid)
    u = dealias(leray_project(u, grid), grid)
    tau = dealias(tau, grid)
    u[:, 0, 0] = 0.0
    tau[:, 0, 0] = 0.0
    return SpectralState(time, amplitude * u, amplitude * tau)


def smooth_state(grid, seed=0, amplitude=1.0, width=None):
    """Random state with a Gaussian spectral envelope (well resolved)."""
    s = random_state(grid, seed)
    width = width or grid.kmax / 4
    env = np.exp(-grid.k2 / width**2)
    return SpectralState(0.0, amplitude * env * s.u_hat, amplitude * env * s.tau_hat)


@pytest.fixture
def grid16():
    return build_grid(16, 2 * np.pi)


@pytest.fixture
def grid32():
    return build_grid(32, 2 * np.pi)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
