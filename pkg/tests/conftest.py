import numpy as np
import pytest

from forms.quartic import LowRankForm


def unit(*components):
    x = np.asarray(components, dtype=float)
    return x / np.linalg.norm(x)


def basis(n, index):
    x = np.zeros(n)
    x[index] = 1.0
    return x


def random_lowrank(rng, n, count=None, signed=True):
    count = 4 * n if count is None else count
    vectors = rng.standard_normal((count, n))
    vectors /= np.linalg.norm(vectors, axis=1)[:, None]
    weights = rng.uniform(-1.0, 1.0, count) if signed else rng.uniform(0.0, 1.0, count)
    return LowRankForm(n, weights, vectors)


def random_unit(rng, n):
    x = rng.standard_normal(n)
    return x / np.linalg.norm(x)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def e0():
    return basis(2, 0)


@pytest.fixture
def e1():
    return basis(2, 1)


@pytest.fixture
def single_atom(e0):
    """sigma(e0)"""
    return LowRankForm(2, [1.0], [e0])


@pytest.fixture
def two_axes(e0, e1):
    """sigma(e0) + sigma(e1)"""
    return LowRankForm(2, [1.0, 1.0], [e0, e1])


@pytest.fixture
def axis_difference(e0, e1):
    """sigma(e0) - sigma(e1), not PSD"""
    return LowRankForm(2, [1.0, -1.0], [e0, e1])
