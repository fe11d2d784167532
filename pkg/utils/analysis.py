# -*- coding: utf-8 -*-
"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0
"""

import numpy as np

from utils.generic import ZeroVectorAtom


def normalize(x: np.ndarray) -> np.ndarray:
    """
    Returns x / ||x||
    Raises ZeroVectorAtom for vectors without direction
    """
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if not np.isfinite(norm) or norm <= np.finfo(float).tiny:
        raise ZeroVectorAtom("Cannot normalize a zero vector")
    return x / norm


def random_unit_vector(rng: np.random.Generator, n: int, init: str = "sphere") -> np.ndarray:
    """
    Draws a starting point on the unit sphere
    :param rng: numpy generator
    :param n: length of the vector
    :param init: "sphere" normalizes a standard normal sample (uniform on the sphere),
    "uniform" normalizes componentwise uniform(0, 1) entries
    """
    if init == "sphere":
        sample = rng.standard_normal(n)
    elif init == "uniform":
        sample = rng.uniform(0.0, 1.0, n)
    else:
        raise ValueError(f'Init "{init}" not valid. Pick sphere or uniform.')
    # a zero draw has probability zero, but keep the generator moving if it happens
    while np.linalg.norm(sample) == 0.0:
        sample = rng.standard_normal(n)
    return normalize(sample)


def random_unit_vectors(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Returns count sphere-uniform rows"""
    samples = rng.standard_normal((count, n))
    norms = np.linalg.norm(samples, axis=1)
    norms[norms == 0.0] = 1.0
    return samples / norms[:, None]


def canonical_sign(x: np.ndarray) -> np.ndarray:
    """
    Flips x so that its largest-magnitude component is positive
    sigma(x) and f(x) do not see the sign
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x
    return -x if x[np.argmax(np.abs(x))] < 0 else x


def align_sign(x: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flips x onto the half space of reference"""
    return -x if np.dot(x, reference) < 0 else x


def chord_sine(chord: float) -> float:
    """
    |sin(theta)| of the angle between two unit vectors from their distance d
    sin^2 = d^2 - d^4 / 4
    """
    d2 = chord * chord
    return float(np.sqrt(max(d2 - d2 * d2 / 4.0, 0.0)))


def one_minus_fourth_power(x: np.ndarray, y: np.ndarray) -> float:
    """
    1 - (x^T y)^4 for unit x, y without cancellation
    1 - c = ||x - y||^2 / 2, taken on the sign of y closest to x
    """
    c = float(np.dot(x, y))
    if c < 0:
        y = -y
        c = -c
    one_minus_c = 0.5 * float(np.dot(x - y, x - y))
    return one_minus_c * (1.0 + c) * (1.0 + c * c)
