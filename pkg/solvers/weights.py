"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Weight refinement for a fixed set of atoms: minimize ||rho - sum w_i sigma(x_i)||_F^2
over w >= 0 (cone) or w >= 0, sum w <= 1 (convex hull), written as the quadratic
1/2 w^T G w - c^T w with G_ij = (x_i^T x_j)^4 and c_i = <rho, sigma(x_i)>.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve

from utils.configloader import KKT_COND_LIMIT
from utils.generic import GramIllConditioned

logger = logging.getLogger(__name__)

DUALITY_TOL = 1e-12


def atom_gram(vectors: np.ndarray) -> np.ndarray:
    """G_ij = <sigma(x_i), sigma(x_j)> = (x_i^T x_j)^4"""
    return (vectors @ vectors.T) ** 4


def objective(gram: np.ndarray, linear: np.ndarray, weights: np.ndarray) -> float:
    """1/2 w^T G w - c^T w; equals (||rho - rho_w||^2 - ||rho||^2) / 2"""
    return float(0.5 * weights @ gram @ weights - linear @ weights)


def _solve_passive(gram: np.ndarray, linear: np.ndarray, passive: np.ndarray) -> np.ndarray:
    sub_gram = gram[np.ix_(passive, passive)]
    if np.linalg.cond(sub_gram) > KKT_COND_LIMIT:
        raise GramIllConditioned(
            f"Gram block of {passive.size} atoms has condition number above {KKT_COND_LIMIT:.0e}"
        )
    try:
        return solve(sub_gram, linear[passive], assume_a="pos")
    except np.linalg.LinAlgError as error:
        raise GramIllConditioned(str(error)) from error


def fnnls(gram: np.ndarray, linear: np.ndarray, epsilon: Optional[float] = None,
          iter_max: Optional[int] = None) -> np.ndarray:
    """
    Active set nonnegative least squares on normal equations (Bro & De Jong variant
    of Lawson-Hanson): minimizes 1/2 w^T G w - c^T w subject to w >= 0
    :param gram: G, symmetric positive semidefinite
    :param linear: c
    :param epsilon: anything below is considered zero, defaults to machine precision
    scaled by the Gram norm
    :param iter_max: maximum number of inner loop iterations, 30 * size by default
    """
    n = gram.shape[0]
    if linear.shape != (n,):
        raise ValueError(f"Invalid dimension; got linear term of shape {linear.shape}, expected ({n},)")
    if epsilon is None:
        epsilon = 10 * np.finfo(float).eps * max(np.abs(gram).sum(axis=0).max(initial=0.0), 1.0) * max(n, 1)
    if iter_max is None:
        iter_max = 30 * max(n, 1)

    # passive[j]: index j is free (positive), otherwise held at zero
    passive = np.zeros(n, dtype=bool)
    weights = np.zeros(n)
    trial = np.zeros(n)
    residual = linear.copy()

    iteration = 0
    while not np.all(passive) and np.max(residual[~passive]) > epsilon and iteration < iter_max:
        candidates = np.flatnonzero(~passive)
        passive[candidates[np.argmax(residual[candidates])]] = True
        free = np.flatnonzero(passive)
        trial[:] = 0.0
        trial[free] = _solve_passive(gram, linear, free)

        while np.any(trial[free] <= epsilon) and iteration < iter_max:
            iteration += 1
            blocking = free[trial[free] <= epsilon]
            gaps = weights[blocking] - trial[blocking]
            alpha = np.min(np.where(gaps > 0, weights[blocking] / np.where(gaps > 0, gaps, 1.0), 0.0))
            weights += alpha * (trial - weights)
            passive[free[weights[free] < epsilon]] = False
            free = np.flatnonzero(passive)
            trial[:] = 0.0
            if free.size:
                trial[free] = _solve_passive(gram, linear, free)

        weights = trial.copy()
        residual = linear - gram @ weights
        iteration += 1

    return np.clip(weights, 0.0, None)


def project_capped_simplex(weights: np.ndarray, cap: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w <= cap}"""
    clipped = np.clip(weights, 0.0, None)
    if clipped.sum() <= cap:
        return clipped
    ordered = np.sort(weights)[::-1]
    cumulative = np.cumsum(ordered) - cap
    index = np.arange(1, weights.size + 1)
    last = np.flatnonzero(ordered - cumulative / index > 0)[-1]
    threshold = cumulative[last] / (last + 1)
    return np.clip(weights - threshold, 0.0, None)


def _kkt_violation(gram, linear, weights, capped: bool) -> float:
    gradient = gram @ weights - linear
    if capped and weights.sum() >= 1.0 - 1e-12:
        # multiplier of the sum constraint shifts the gradient
        shift = -np.min(gradient[weights > 0]) if np.any(weights > 0) else 0.0
        gradient = gradient + max(shift, 0.0)
    free = weights > 0
    violation = np.abs(gradient[free]).max(initial=0.0)
    return max(violation, -gradient[~free].min(initial=0.0))


def projected_gradient(gram: np.ndarray, linear: np.ndarray, start: Optional[np.ndarray] = None,
                       capped: bool = False, epsilon: float = DUALITY_TOL,
                       max_n_iter: int = 10000) -> np.ndarray:
    """
    Gradient projection with exact line search along the projected direction
    Stops once the KKT violation falls below epsilon
    """
    n = gram.shape[0]
    weights = np.zeros(n) if start is None else np.array(start, dtype=float)
    project = project_capped_simplex if capped else (lambda w: np.clip(w, 0.0, None))
    weights = project(weights)
    lipschitz = max(np.linalg.norm(gram, 2), np.finfo(float).tiny)

    for iteration in range(max_n_iter):
        if _kkt_violation(gram, linear, weights, capped) < epsilon:
            logger.debug("Projected gradient converged after %d iterations", iteration)
            break
        gradient = gram @ weights - linear
        direction = project(weights - gradient / lipschitz) - weights
        curvature = direction @ gram @ direction
        if curvature <= 0.0:
            break
        # the segment stays feasible, so the exact minimizer along it is safe up to 1
        step = min(1.0, -(gradient @ direction) / curvature)
        if step <= 0.0:
            break
        weights = weights + step * direction
    else:
        logger.info("Projected gradient stopped at %d iterations", max_n_iter)
    return project(weights)


def solve_weights(gram: np.ndarray, linear: np.ndarray, capped: bool = False,
                  start: Optional[np.ndarray] = None) -> Tuple[np.ndarray, str]:
    """
    Optimal weights for the quadratic, active set first
    :return: weights and the method that produced them ("nnls" or "pgm")
    """
    if not capped:
        try:
            return fnnls(gram, linear), "nnls"
        except GramIllConditioned as error:
            logger.info("%s; falling back to projected gradient", error)
    return projected_gradient(gram, linear, start=start, capped=capped), "pgm"
