"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Maximization of f(x) = 1/4 <x,x|eta|x,x> over the unit sphere: shifted power
method, SQP step on the KKT system, exact search over two dimensional spans and
their combination with multi-start.
"""
import logging
import multiprocessing as mp
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as poly
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from forms.quartic import QuarticForm
from utils.analysis import align_sign, canonical_sign, normalize, random_unit_vector
from utils.configloader import (
    INIT,
    KKT_COND_LIMIT,
    KKT_STOP,
    MAX_INNER,
    PARALLEL_TOL,
    ROOT_IMAG_TOL,
    SHIFT_MARGIN,
    TOL_INNER,
)
from utils.generic import InnerSolverFailed, MaxIterationsReached, NearParallelInputs, SingularKKTSystem

logger = logging.getLogger(__name__)

SQP = "SQP"
PM = "PM"
MIX = "MIX"


@dataclass
class InnerResult:
    x_star: np.ndarray
    f_star: float
    lambda_star: float
    iterations: int
    converged: bool
    trace: List[Tuple[int, float, float, str]] = field(default_factory=list)
    iterates: Optional[List[np.ndarray]] = None
    start: int = 0

    @property
    def kkt_residual(self) -> float:
        return self.trace[-1][2] if self.trace else float("nan")

    def to_dict(self) -> dict:
        return dict(
            x_star=self.x_star.tolist(),
            f_star=self.f_star,
            lambda_star=self.lambda_star,
            iterations=self.iterations,
            converged=self.converged,
            start=self.start,
        )


def b_matrix(form: QuarticForm, x) -> np.ndarray:
    """(B_x)_ij = sum_kl eta_ijkl x_k x_l"""
    return form.b_matrix(x)


def derivatives(form: QuarticForm, x) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    f, gradient and Hessian from one contraction
    f = x^T B_x x / 4, grad = B_x x, hess = 3 B_x
    """
    b = form.b_matrix(x)
    grad = b @ x
    return 0.25 * float(x @ grad), grad, 3.0 * b


def power_shift(form: QuarticForm) -> float:
    """Shift that makes the power step monotone: 3 * spectral bound plus a margin"""
    return 3.0 * form.spectral_bound + SHIFT_MARGIN


def _kkt_residual(grad: np.ndarray, x: np.ndarray, lam: float) -> float:
    return float(np.linalg.norm(grad - lam * x))


def _check_finite(*values):
    for value in values:
        if not np.all(np.isfinite(value)):
            raise InnerSolverFailed("Non-finite value in the inner iteration")


def _finish(result: InnerResult, strict: bool, name: str) -> InnerResult:
    result.x_star = canonical_sign(result.x_star)
    if not result.converged:
        message = f"{name} stopped after {result.iterations} iterations without reaching the tolerance"
        if strict:
            raise MaxIterationsReached(message, result)
        logger.warning(message)
    return result


def power_method(form: QuarticForm, x0, tol: float = TOL_INNER, maxit: int = MAX_INNER,
                 strict: bool = False, keep_iterates: bool = False) -> InnerResult:
    """
    Shifted power iteration x <- (B_x x + alpha x) / ||.||
    :param form: form to maximize
    :param x0: start, normalized here
    :param tol: stop once ||x_k - x_k+1|| <= tol
    :param maxit: iteration cap
    :param strict: raise MaxIterationsReached at the cap instead of returning unconverged
    :param keep_iterates: store every iterate on the result
    """
    alpha = power_shift(form)
    x = normalize(x0)
    iterates = [x] if keep_iterates else None
    trace = []
    converged = False
    iterations = 0
    for iterations in range(1, maxit + 1):
        grad = form.b_matrix(x) @ x
        x_next = normalize(grad + alpha * x)
        f_next, grad_next, _ = derivatives(form, x_next)
        _check_finite(x_next, f_next)
        lam_next = 4.0 * f_next
        trace.append((iterations, f_next, _kkt_residual(grad_next, x_next, lam_next), PM))
        error = np.linalg.norm(x - x_next)
        x = x_next
        if keep_iterates:
            iterates.append(x)
        if error <= tol:
            converged = True
            break
    f_star = form.evaluate(x)
    result = InnerResult(x, f_star, 4.0 * f_star, iterations, converged, trace, iterates)
    return _finish(result, strict, "Power method")


def _sqp_from(b: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    n = x.size
    grad = b @ x
    residual = grad - lam * x
    if not np.any(residual):
        return x
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = 3.0 * b - lam * np.eye(n)
    kkt[:n, n] = -x
    kkt[n, :n] = -x
    rhs = -np.append(residual, 0.0)
    lu, piv = lu_factor(kkt, check_finite=False)
    rcond, info = dgecon(lu, np.linalg.norm(kkt, 1), norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < 1.0 / KKT_COND_LIMIT:
        raise SingularKKTSystem(f"KKT system reciprocal condition {rcond:.3e}")
    step = lu_solve((lu, piv), rhs, check_finite=False)[:n]
    return normalize(x + step)


def sqp_step(form: QuarticForm, x, lam: float) -> np.ndarray:
    """
    Newton step on grad f - lambda x = 0, x^T x = 1
    Solves [[hess - lambda I, -x], [-x^T, 0]] (p, dlambda) = -(grad - lambda x, 0)
    and returns (x + p) / ||x + p||
    Raises SingularKKTSystem when the condition estimate exceeds the limit
    """
    x = np.asarray(x, dtype=float)
    return _sqp_from(form.b_matrix(x), x, lam)


def stationary_numerator(coefficients, b: float = 0.0) -> np.ndarray:
    """
    Numerator of d/dt P(t) / (1 + 2bt + t^2)^2:
    P'(t) (1 + 2bt + t^2) - 4 P(t) (b + t), ascending coefficients
    """
    p = np.asarray(coefficients, dtype=float)
    numerator = poly.polysub(
        poly.polymul(poly.polyder(p), [1.0, 2.0 * b, 1.0]),
        poly.polymul(4.0 * p, [b, 1.0]),
    )
    return poly.polytrim(numerator)


def _real_roots(numerator: np.ndarray) -> np.ndarray:
    if numerator.size < 2:
        return np.zeros(0)
    roots = poly.polyroots(numerator)
    real = np.abs(roots.imag) <= ROOT_IMAG_TOL * (1.0 + np.abs(roots.real))
    return roots.real[real]


def _span_search(form: QuarticForm, x: np.ndarray, y: np.ndarray):
    """Returns (v, f_v, origin) with origin "x", "y" or "mix" """
    b = float(x @ y)
    f_x, f_y = form.evaluate(x), form.evaluate(y)
    if abs(b) > 1.0 - PARALLEL_TOL:
        better, value = (x, f_x) if f_x >= f_y else (y, f_y)
        raise NearParallelInputs(f"Search directions are parallel up to {1.0 - abs(b):.1e}", better, value)
    # orthonormal partner of x inside the span
    z = normalize(y - b * x)
    b_x, b_z = form.b_matrix(x), form.b_matrix(z)
    coefficients = [
        f_x,
        float(x @ b_x @ z),
        1.5 * float(x @ b_z @ x),
        float(x @ b_z @ z),
        0.25 * float(z @ b_z @ z),
    ]
    candidates = [(x, f_x, "x"), (y, f_y, "y"), (z, coefficients[4], "mix")]
    for t in _real_roots(stationary_numerator(coefficients)):
        v = normalize(x + t * z)
        candidates.append((v, form.evaluate(v), "mix"))
    best = candidates[0]
    for candidate in candidates[1:]:
        if candidate[1] > best[1]:
            best = candidate
    return best


def line_search_2d(form: QuarticForm, x, y) -> Tuple[np.ndarray, float]:
    """
    Global maximizer of f over unit vectors of span{x, y}
    Stationary points of g(t) = f(x + t z) / (1 + t^2)^2 with z the orthonormal
    partner of x are the real roots of a quartic; the endpoints t = 0 and
    t = infinity and y itself are compared too
    Raises NearParallelInputs (carrying the better input) if |x^T y| > 1 - 1e-12
    """
    v, value, _ = _span_search(form, normalize(x), normalize(y))
    return v, value


def inner_solve(form: QuarticForm, x0, tol: float = TOL_INNER, maxit: int = MAX_INNER,
                strict: bool = False, keep_iterates: bool = False) -> InnerResult:
    """
    SQP step and shifted power step per iteration, combined by the exact search
    over their span; falls back to the power step when the KKT system is singular
    Stops when ||x_k - x_k+1|| <= tol or the KKT residual drops below
    1e-10 * (1 + |lambda_k|)
    """
    alpha = power_shift(form)
    x = normalize(x0)
    b = form.b_matrix(x)
    grad = b @ x
    lam = float(x @ grad)
    f = 0.25 * lam
    iterates = [x] if keep_iterates else None
    trace = []
    converged = False
    iterations = 0

    while iterations < maxit:
        if _kkt_residual(grad, x, lam) <= KKT_STOP * (1.0 + abs(lam)):
            converged = True
            break
        iterations += 1
        x_pm = normalize(grad + alpha * x)
        try:
            x_sqp = _sqp_from(b, x, lam)
        except SingularKKTSystem as error:
            logger.debug("Iteration %d: %s, using the power step", iterations, error)
            x_sqp = None

        if x_sqp is None:
            candidate, source = x_pm, PM
        else:
            try:
                candidate, _, origin = _span_search(form, x_sqp, x_pm)
                source = {"x": SQP, "y": PM}.get(origin, MIX)
            except NearParallelInputs as parallel:
                candidate = parallel.vector
                source = SQP if candidate is x_sqp else PM

        candidate = align_sign(candidate, x)
        b_next = form.b_matrix(candidate)
        grad_next = b_next @ candidate
        lam_next = float(candidate @ grad_next)
        _check_finite(candidate, lam_next)
        if 0.25 * lam_next < f:
            # rounding level decrease, keep the current point
            candidate, b_next, grad_next, lam_next = x, b, grad, lam

        error = np.linalg.norm(x - candidate)
        x, b, grad, lam = candidate, b_next, grad_next, lam_next
        f = 0.25 * lam
        trace.append((iterations, f, _kkt_residual(grad, x, lam), source))
        if keep_iterates:
            iterates.append(x)
        logger.debug("Iteration %d: f = %.17g, step %.3e (%s)", iterations, f, error, source)
        if error <= tol:
            converged = True
            break

    result = InnerResult(x, f, lam, iterations, converged, trace, iterates)
    return _finish(result, strict, "Inner solver")


def start_point(seed: int, start: int, n: int, init: str = INIT) -> np.ndarray:
    """Initial point of one start, seeded with seed XOR start"""
    return random_unit_vector(np.random.default_rng(seed ^ start), n, init)


def _run_start(arguments) -> InnerResult:
    form, seed, start, tol, maxit, init = arguments
    result = inner_solve(form, start_point(seed, start, form.n, init), tol, maxit)
    result.start = start
    return result


def multi_start(form: QuarticForm, starts: int = 5, seed: int = 0, tol: float = TOL_INNER,
                maxit: int = MAX_INNER, init: str = INIT, threads: int = 1) -> InnerResult:
    """
    Runs inner_solve from independent starts and keeps the largest f
    Ties go to the lowest start index, so the outcome does not depend on threads
    """
    if starts < 1:
        raise ValueError(f"Need at least one start, got {starts}")
    jobs = [(form, seed, start, tol, maxit, init) for start in range(starts)]
    if threads > 1 and starts > 1:
        with mp.Pool(min(threads, starts)) as pool:
            results = pool.map(_run_start, jobs)
    else:
        results = [_run_start(job) for job in jobs]

    best = results[0]
    for result in results[1:]:
        if result.f_star > best.f_star:
            best = result
    logger.debug("Best of %d starts: f = %.17g from start %d", starts, best.f_star, best.start)
    return best
