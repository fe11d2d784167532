"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Benchmark forms, deterministic in (id, n, seed)
"""
import numpy as np

from forms.quartic import LowRankForm, QuarticForm, SumKernelForm
from utils.analysis import random_unit_vectors
from utils.generic import DimensionMismatch, UnknownExampleId


def separable_state(n: int, rng: np.random.Generator) -> LowRankForm:
    """4N sphere-uniform atoms with uniform(0, 1) weights normalized to trace one"""
    vectors = random_unit_vectors(rng, 4 * n, n)
    weights = rng.uniform(0.0, 1.0, 4 * n)
    return LowRankForm(n, weights / weights.sum(), vectors)


def signed_combination(n: int, rng: np.random.Generator) -> LowRankForm:
    """4N sphere-uniform atoms with uniform(-1, 1) weights"""
    vectors = random_unit_vectors(rng, 4 * n, n)
    weights = rng.uniform(-1.0, 1.0, 4 * n)
    return LowRankForm(n, weights, vectors)


def linear_kernel(n: int, rng: np.random.Generator = None) -> SumKernelForm:
    """eta_ijkl = (i + j + k + l) / (4 N^3)"""
    s = np.arange(4 * n - 3, dtype=float)
    return SumKernelForm(n, s / (4.0 * n ** 3))


def sine_kernel(n: int, rng: np.random.Generator = None) -> SumKernelForm:
    """eta_ijkl = sin((i + j + k + l) / (4 N)) / N^2"""
    s = np.arange(4 * n - 3, dtype=float)
    return SumKernelForm(n, np.sin(s / (4.0 * n)) / n ** 2)


EXAMPLES = {
    1: separable_state,
    2: signed_combination,
    3: linear_kernel,
    4: sine_kernel,
}


def gen_example(example_id: int, n: int, seed: int = 0) -> QuarticForm:
    """
    Builds one of the four benchmark forms
    :param example_id: 1 separable state, 2 signed low rank, 3 linear and 4 sine sum kernel
    :param n: local dimension
    :param seed: seed of the generator, ignored by the kernels
    """
    try:
        builder = EXAMPLES[int(example_id)]
    except (KeyError, TypeError, ValueError):
        raise UnknownExampleId(f'Example "{example_id}" not valid. Pick one of {sorted(EXAMPLES)}.')
    if n < 2:
        raise DimensionMismatch(f"Local dimension must be >= 2, got {n}")
    return builder(int(n), np.random.default_rng(seed))
