"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Brute force references for the solvers. Everything here works on a naively
assembled dense tensor and never calls the structured contractions it checks.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from numba import jit

from utils.configloader import GRID_RESOLUTION_2D, GRID_RESOLUTION_3D, HESS_STEP, OPTIMALITY_SAMPLES
from utils.generic import DenseCapExceeded, UnsupportedDimension

logger = logging.getLogger(__name__)

CROSS_CHECK_CAP = 6


@dataclass
class OracleReport:
    target: str
    reference: dict
    discrepancy: float
    parameters: dict = field(default_factory=dict)
    tolerance: float = 1e-10

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tolerance


"""naive dense assembly"""


def naive_tensor(form) -> np.ndarray:
    """
    Dense (i, j, k, l) tensor assembled entry by entry from the stored payload
    """
    n = form.n
    if hasattr(form, "plus") and hasattr(form, "minus"):
        return naive_tensor(form.plus) - naive_tensor(form.minus)
    tensor = np.zeros((n, n, n, n))
    if hasattr(form, "entries"):
        tensor[:] = form.entries
    elif hasattr(form, "phi"):
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        tensor[i, j, k, l] = form.phi[i + j + k + l]
    else:
        for weight, x in zip(form.weights, form.vectors):
            tensor += weight * np.multiply.outer(np.multiply.outer(x, x), np.multiply.outer(x, x))
    return tensor


@jit(nopython=True, cache=True)
def quartic_value(tensor, x):
    """<x,x|T|x,x> by explicit summation"""
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    total += tensor[i, j, k, l] * x[i] * x[j] * x[k] * x[l]
    return total


@jit(nopython=True, cache=True)
def grid_max_2d(tensor, resolution):
    """Best (cos t, sin t) over t in [0, pi), f(-x) = f(x) covers the rest"""
    steps = int(np.ceil(np.pi / resolution))
    best_value = -np.inf
    best_angle = 0.0
    x = np.zeros(2)
    for step in range(steps):
        angle = step * resolution
        x[0] = np.cos(angle)
        x[1] = np.sin(angle)
        value = 0.25 * quartic_value(tensor, x)
        if value > best_value:
            best_value = value
            best_angle = angle
    return best_angle, best_value


@jit(nopython=True, cache=True)
def grid_max_3d(tensor, resolution):
    """Best point on a polar/azimuth grid over the upper half sphere"""
    polar_steps = int(np.ceil(0.5 * np.pi / resolution)) + 1
    azimuth_steps = int(np.ceil(2.0 * np.pi / resolution))
    best_value = -np.inf
    best_polar = 0.0
    best_azimuth = 0.0
    x = np.zeros(3)
    for i in range(polar_steps):
        polar = min(i * resolution, 0.5 * np.pi)
        for j in range(azimuth_steps):
            azimuth = j * resolution
            x[0] = np.sin(polar) * np.cos(azimuth)
            x[1] = np.sin(polar) * np.sin(azimuth)
            x[2] = np.cos(polar)
            value = 0.25 * quartic_value(tensor, x)
            if value > best_value:
                best_value = value
                best_polar = polar
                best_azimuth = azimuth
    return best_polar, best_azimuth, best_value


def grid_max(form, resolution: float = None):
    """
    Global maximum of f on the unit sphere by exhaustive grid search
    :param form: form with N = 2 or N = 3
    :param resolution: angular step, defaults from advanced_settings.ini
    :return: (x, f)
    """
    tensor = naive_tensor(form)
    if form.n == 2:
        resolution = GRID_RESOLUTION_2D if resolution is None else resolution
        angle, value = grid_max_2d(tensor, resolution)
        return np.array([np.cos(angle), np.sin(angle)]), float(value)
    if form.n == 3:
        resolution = GRID_RESOLUTION_3D if resolution is None else resolution
        polar, azimuth, value = grid_max_3d(tensor, resolution)
        x = np.array([np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)])
        return x, float(value)
    raise UnsupportedDimension(f"Grid search only covers N = 2 and N = 3, got N = {form.n}")


def fd_derivatives(form, x, h: float = 1e-5, hess_step: float = HESS_STEP):
    """
    Central differences of f = 1/4 <x,x|T|x,x> on the ambient space
    :param h: step of the gradient differences
    :param hess_step: step of the second differences; rounding grows like eps / step^2
    :return: (grad, hess)
    """
    tensor = naive_tensor(form)
    x = np.asarray(x, dtype=float)
    n = x.size

    def value(point):
        return 0.25 * quartic_value(tensor, point)

    grad = np.zeros(n)
    hess = np.zeros((n, n))
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = h
        grad[i] = (value(x + e_i) - value(x - e_i)) / (2 * h)
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = hess_step
        for j in range(i, n):
            e_j = np.zeros(n)
            e_j[j] = hess_step
            hess[i, j] = (
                value(x + e_i + e_j) - value(x + e_i - e_j) - value(x - e_i + e_j) + value(x - e_i - e_j)
            ) / (4 * hess_step ** 2)
            hess[j, i] = hess[i, j]
    return grad, hess


def _atom_tensor(rho_star, n: int) -> np.ndarray:
    if hasattr(rho_star, "weights") and not hasattr(rho_star, "b_matrix"):
        tensor = np.zeros((n, n, n, n))
        for weight, x in zip(rho_star.weights, rho_star.vectors):
            tensor += weight * np.multiply.outer(np.multiply.outer(x, x), np.multiply.outer(x, x))
        return tensor
    return naive_tensor(rho_star)


def optimality_sample(rho, rho_star, samples: int = OPTIMALITY_SAMPLES, seed: int = 0) -> float:
    """
    max over sphere-uniform x of <rho - rho*, sigma(x) - rho*>
    Nonpositive (up to tolerance) for the projection rho*
    """
    n = rho.n
    residual = naive_tensor(rho) - _atom_tensor(rho_star, n)
    offset = float(np.sum(residual * _atom_tensor(rho_star, n)))
    rng = np.random.default_rng(seed)
    points = rng.standard_normal((samples, n))
    points /= np.linalg.norm(points, axis=1)[:, None]
    values = np.einsum("ijkl,si,sj,sk,sl->s", residual, points, points, points, points)
    return float(np.max(values) - offset)


def _relative(value, reference) -> float:
    value, reference = np.asarray(value, dtype=float), np.asarray(reference, dtype=float)
    return float(np.max(np.abs(value - reference)) / max(1.0, float(np.max(np.abs(reference)))))


def cross_check(form, trials: int = 3, seed: int = 0) -> OracleReport:
    """
    Compares B_x, f and inner products of the structured representation against
    the naive dense tensor at random points
    """
    from forms.quartic import atom, inner_product

    if form.n > CROSS_CHECK_CAP:
        raise DenseCapExceeded(f"Cross check assembles N^4 entries, capped at N = {CROSS_CHECK_CAP}")
    tensor = naive_tensor(form)
    rng = np.random.default_rng(seed)
    discrepancy = _relative(inner_product(form, form), np.sum(tensor * tensor))
    reference = dict(frobenius_squared=float(np.sum(tensor * tensor)))
    for _ in range(trials):
        x = rng.standard_normal(form.n)
        x /= np.linalg.norm(x)
        b_reference = np.einsum("ijkl,k,l->ij", tensor, x, x)
        f_reference = 0.25 * quartic_value(tensor, x)
        discrepancy = max(
            discrepancy,
            _relative(form.b_matrix(x), b_reference),
            _relative(form.evaluate(x), f_reference),
            _relative(inner_product(form, atom(x)), 4.0 * f_reference),
        )
    logger.debug("Cross check of %s form: discrepancy %.3e", form.repr_name, discrepancy)
    return OracleReport(
        target="cs_core",
        reference=reference,
        discrepancy=discrepancy,
        parameters=dict(trials=trials, seed=seed, n=form.n),
    )
