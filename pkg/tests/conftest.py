"""Shared fixtures: the built-in examples and random instance builders."""

import logging
import math
import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from convex_np import config as np_config  # noqa: E402
from convex_np.logs import LOGGER_NAME  # noqa: E402
from convex_np.measure import make_space  # noqa: E402
from convex_np.risk_models import Entropic, FinitelyGenerated, Linear  # noqa: E402

E = math.e


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: randomized suites with grid or LP oracles")


def random_space(rng, n):
    weights = rng.uniform(0.2, 1.0, size=n)
    return make_space(weights / weights.sum())


def random_density(rng, space):
    raw = rng.uniform(0.1, 1.0, size=space.size)
    return space.normalized_density(raw)


def random_rho(rng, space, family):
    if family == "linear":
        return Linear(space, random_density(rng, space))
    if family == "entropic":
        return Entropic(space, random_density(rng, space), float(rng.uniform(0.5, 2.0)))
    generators = [random_density(rng, space) for _ in range(int(rng.integers(2, 4)))]
    return FinitelyGenerated(space, generators, rng.uniform(0.0, 0.2, size=len(generators)))


@pytest.fixture
def half_space():
    """Two atoms of weight one half."""
    return make_space([0.5, 0.5])


@pytest.fixture
def example_41():
    return np_config.builtin_problem("paper-4.1")


@pytest.fixture
def example_42():
    return np_config.builtin_problem("paper-4.2")


@pytest.fixture
def example_43():
    return np_config.builtin_problem("paper-4.3")


@pytest.fixture
def example_61():
    return np_config.builtin_problem("paper-6.1")


@pytest.fixture
def binomial_market():
    return np_config.builtin_market("hedge-binomial")


@pytest.fixture
def trinomial_market():
    return np_config.builtin_market("hedge-trinomial")


@pytest.fixture
def package_logger():
    """The package logger, with its handlers restored afterwards."""
    logger = logging.getLogger(LOGGER_NAME)
    saved = list(logger.handlers), logger.level, logger.propagate
    logger.handlers = []
    yield logger
    for handler in logger.handlers:
        handler.close()
    logger.handlers, logger.level, logger.propagate = list(saved[0]), saved[1], saved[2]
