from __future__ import annotations

import numpy as np
import pytest

from ergokit.kernel import StochasticKernel, validate_kernel

CYCLE2 = [[0.0, 1.0], [1.0, 0.0]]
UNIFORM2 = [[0.5, 0.5], [0.5, 0.5]]
LEAKY = [[0.5, 0.5], [0.0, 1.0]]
ABSORB0 = [[1.0, 0.0], [0.5, 0.5]]
TWO_STATE = [[0.9, 0.1], [0.2, 0.8]]
# diag(2-cycle, [[1]])
BLOCK3 = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]


def K(rows) -> StochasticKernel:
    return validate_kernel(rows)


def random_stochastic(rng: np.random.Generator, n: int, density: float = 0.5) -> StochasticKernel:
    w = rng.random((n, n)) * (rng.random((n, n)) < density)
    for i in np.flatnonzero(w.sum(axis=1) == 0):
        w[i, rng.integers(n)] = 1.0
    return StochasticKernel(w / w.sum(axis=1, keepdims=True))


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
