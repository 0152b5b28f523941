from __future__ import annotations

import numpy as np
import pytest

from obsfuse.data import FusedDataset
from obsfuse.simulation import SimulationConfig


def baseline(**kw) -> SimulationConfig:
    """Simulation baseline: first-stage R^2 of 0.95, pi_O = 0.95, n_E = 100."""
    return SimulationConfig.with_first_stage_r2(0.95, **kw)


def linear_dataset(rng, n_E=60, n_O=400, beta1=0.1, b2=0.5, gamma=0.9, noise=1.0) -> FusedDataset:
    """Small dataset whose observational rows satisfy the exclusion-violating model."""
    z = rng.standard_normal(n_E + n_O)
    x = np.concatenate([rng.standard_normal(n_E), gamma * z[n_E:] + 0.4 * rng.standard_normal(n_O)])
    u = noise * rng.standard_normal(n_E + n_O)
    y = beta1 * x + b2 * z + u
    return FusedDataset(y + 1.5, x - 0.2, z + 0.7, np.arange(n_E + n_O) < n_E)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)
