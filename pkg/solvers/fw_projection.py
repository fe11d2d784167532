"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Projection of a completely symmetric form onto the S-separable cone (or the
convex hull of atoms) with Frank-Wolfe steps, an exact step size, optional
fully corrective weight refinement and a stopping gap.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from forms.quartic import (
    DifferenceForm,
    LowRankForm,
    QuarticForm,
    frob_distance,
    inner_product,
    lowrank_distance,
    psd_distance,
)
from solvers.inner_solver import multi_start
from solvers.weights import atom_gram, objective, solve_weights
from utils.analysis import normalize
from utils.configloader import (
    CERTIFICATE_FLOOR,
    CERTIFICATE_SLACK,
    GAP_TOL,
    INIT,
    MAX_INNER,
    MAX_OUTER,
    MAX_SECONDS,
    MERGE_TOL,
    MODE,
    PRUNE_TOL,
    REFINE,
    SEED,
    SEPARABLE_TOL,
    SLIDE,
    SLIDE_ITER,
    STARTS,
    THREADS,
    TOL_INNER,
    TOL_OUTER,
)
from utils.generic import DegenerateDirection, DimensionMismatch, InnerSolverFailed, Timer

logger = logging.getLogger(__name__)

CONE = "cone"
CONVEX = "convex"

S_SEPARABLE_NUMERICAL = "S_SEPARABLE_NUMERICAL"
NOT_S_SEPARABLE_CERTIFIED = "NOT_S_SEPARABLE_CERTIFIED"
INCONCLUSIVE = "INCONCLUSIVE"

# keeps the per-start seeds of different outer iterations apart
SEED_STRIDE = 1 << 16


class AtomList:
    """
    Nonnegative combination sum p_i sigma(x_i) of pairwise distinct unit atoms
    Atoms closer than the merge tolerance share one entry
    """

    def __init__(self, n: int, mode: str = CONE):
        if mode not in (CONE, CONVEX):
            raise ValueError(f'Mode "{mode}" not valid. Pick cone or convex.')
        self.n = n
        self.mode = mode
        self.weights = np.zeros(0)
        self.vectors = np.zeros((0, n))

    @classmethod
    def from_arrays(cls, n: int, weights, vectors, mode: str = CONE) -> "AtomList":
        atoms = cls(n, mode)
        vectors = np.asarray(vectors, dtype=float).reshape(-1, n)
        for weight, vector in zip(np.asarray(weights, dtype=float).reshape(-1), vectors):
            norm = np.linalg.norm(vector)
            # sigma(c x) = c^4 sigma(x)
            atoms.add(vector / norm, weight * norm ** 4)
        return atoms

    def __len__(self) -> int:
        return self.weights.size

    def copy(self) -> "AtomList":
        other = AtomList(self.n, self.mode)
        other.weights = self.weights.copy()
        other.vectors = self.vectors.copy()
        return other

    def add(self, x, weight: float):
        """Adds weight * sigma(x), merged into an existing atom when |x^T x_i| > 1 - 1e-10"""
        x = normalize(x)
        if x.size != self.n:
            raise DimensionMismatch(f"Atom of length {x.size} for N = {self.n}")
        if len(self):
            overlaps = np.abs(self.vectors @ x)
            closest = int(np.argmax(overlaps))
            if overlaps[closest] > 1.0 - MERGE_TOL:
                self.weights[closest] += weight
                return
        self.weights = np.append(self.weights, weight)
        self.vectors = np.vstack([self.vectors, x])

    def scale(self, factor: float):
        self.weights = self.weights * factor

    def set_weights(self, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != self.weights.shape:
            raise DimensionMismatch(f"Got {weights.size} weights for {len(self)} atoms")
        self.weights = weights.copy()

    def prune(self, tol: float = PRUNE_TOL):
        keep = self.weights >= tol
        self.weights = self.weights[keep]
        self.vectors = self.vectors[keep]

    def as_form(self) -> LowRankForm:
        return LowRankForm(self.n, self.weights, self.vectors)

    def payload(self) -> dict:
        return dict(
            n=self.n,
            repr="atoms",
            mode=self.mode,
            weights=self.weights.tolist(),
            vectors=self.vectors.tolist(),
        )


@dataclass
class OuterResult:
    approximation: AtomList
    distance: float
    gap: float
    iterations: int
    trace: List[Tuple[int, float, float, float, int, int]] = field(default_factory=list)
    verdict: str = INCONCLUSIVE
    stop_reason: str = ""
    psd_lower_bound: Optional[float] = None
    clamped: List[int] = field(default_factory=list)

    @property
    def at_cap(self) -> bool:
        return self.stop_reason in ("max_outer", "time", "inner_failed")

    def to_dict(self) -> dict:
        return dict(
            verdict=self.verdict,
            distance=self.distance,
            gap=self.gap,
            iterations=self.iterations,
            stop_reason=self.stop_reason,
            psd_lower_bound=self.psd_lower_bound,
            atom_count=len(self.approximation),
            atoms=self.approximation.payload(),
        )


def _sigma_gap(rho: QuarticForm, rho_k: AtomList, x: np.ndarray) -> float:
    """<rho - rho_k, sigma(x) - rho_k>"""
    form_k = rho_k.as_form()
    return (
        rho.quartic(x)
        - form_k.quartic(x)
        - inner_product(rho, form_k)
        + inner_product(form_k, form_k)
    )


def step_size(rho: QuarticForm, rho_k: AtomList, sigma_atom, clamp: bool = True) -> float:
    """
    Exact minimizer of ||rho - rho_k - alpha (sigma - rho_k)||^2:
    alpha = <rho - rho_k, sigma - rho_k> / ||sigma - rho_k||^2, clamped to [0, 1]
    :param sigma_atom: unit vector x of sigma(x)
    """
    x = normalize(sigma_atom)
    distance = lowrank_distance([1.0], [x], rho_k.weights, rho_k.vectors)
    if distance < 1e-14:
        raise DegenerateDirection(f"Atom coincides with the iterate up to {distance:.1e}")
    alpha = _sigma_gap(rho, rho_k, x) / distance ** 2
    return float(np.clip(alpha, 0.0, 1.0)) if clamp else float(alpha)


def refine_weights(rho: QuarticForm, atoms, capped: bool = False, current=None) -> np.ndarray:
    """
    Optimal nonnegative weights of fixed atoms
    Minimizes ||rho - sum w_i sigma(x_i)||^2 over w >= 0 (and sum w <= 1 if capped)
    :param atoms: unit vectors, one per row
    :param current: weights to keep if the solver does not improve on them
    """
    vectors = np.atleast_2d(np.asarray(atoms, dtype=float))
    if vectors.shape[0] == 0:
        return np.zeros(0)
    gram = atom_gram(vectors)
    linear = rho.quartic_many(vectors)
    weights, method = solve_weights(gram, linear, capped=capped, start=current)
    if current is not None and objective(gram, linear, weights) > objective(gram, linear, current):
        logger.debug("Refinement (%s) did not improve the weights, keeping them", method)
        return np.asarray(current, dtype=float)
    return weights


def psd_lower_bound(rho: QuarticForm) -> Optional[float]:
    """Distance from rho to the PSD cone, None above the dense cap"""
    return psd_distance(rho)


def verdict(result: OuterResult, rho: QuarticForm, lower_bound: Optional[float] = None) -> str:
    """
    S_SEPARABLE_NUMERICAL if the distance vanishes relative to ||rho||,
    NOT_S_SEPARABLE_CERTIFIED if it reaches the PSD cone distance,
    INCONCLUSIVE otherwise
    """
    scale = max(1.0, float(np.sqrt(max(inner_product(rho, rho), 0.0))))
    if result.distance <= SEPARABLE_TOL * scale:
        return S_SEPARABLE_NUMERICAL
    if lower_bound is None:
        lower_bound = psd_lower_bound(rho)
    if (
        lower_bound is not None
        and lower_bound > CERTIFICATE_FLOOR
        and result.distance >= lower_bound - CERTIFICATE_SLACK
    ):
        return NOT_S_SEPARABLE_CERTIFIED
    return INCONCLUSIVE


def _distance(rho: QuarticForm, atoms: AtomList) -> float:
    return frob_distance(rho, atoms.as_form())


def _refine(rho: QuarticForm, atoms: AtomList, refine: bool):
    if refine:
        atoms.set_weights(refine_weights(rho, atoms.vectors, atoms.mode == CONVEX, atoms.weights))
    elif atoms.mode == CONE and len(atoms):
        # best nonnegative multiple of the iterate
        form = atoms.as_form()
        norm = inner_product(form, form)
        if norm > 0:
            beta = inner_product(rho, form) / norm
            if beta > 0:
                atoms.scale(beta)
    atoms.prune()


def slide_atoms(rho: QuarticForm, atoms: AtomList, refine: bool = True, maxiter: int = SLIDE_ITER) -> AtomList:
    """
    Moves positions and weights of all atoms jointly (cone mode)
    w sigma(x) = sigma(w^(1/4) x), so with rows y_i = w_i^(1/4) x_i the distance is
    ||rho - rho_Y||^2 = ||rho||^2 + 2 F(Y), F(Y) = 1/2 sum_ij (y_i^T y_j)^4 - sum_i <y_i,y_i|rho|y_i,y_i>
    and F is minimized without constraints by L-BFGS
    :return: new atom list, the input stays untouched
    """
    count, n = atoms.vectors.shape
    if count == 0:
        return atoms.copy()

    def value_and_gradient(flat: np.ndarray):
        y = flat.reshape(count, n)
        gram = y @ y.T
        value = 0.5 * np.sum(gram ** 4) - np.sum(rho.quartic_many(y))
        gradient = 4.0 * ((gram ** 3) @ y - rho.contractions(y))
        return value, gradient.ravel()

    start = atoms.vectors * atoms.weights[:, None] ** 0.25
    result = minimize(
        value_and_gradient,
        start.ravel(),
        jac=True,
        method="L-BFGS-B",
        options=dict(maxiter=maxiter, ftol=0.0, gtol=0.0),
    )
    # result.x is the best point seen even when the line search gives up
    rows = result.x.reshape(count, n)
    keep = np.linalg.norm(rows, axis=1) ** 4 >= PRUNE_TOL
    moved = AtomList.from_arrays(n, np.ones(int(keep.sum())), rows[keep], atoms.mode)
    _refine(rho, moved, refine)
    logger.debug("Sliding: %d L-BFGS iterations, %d -> %d atoms", result.nit, count, len(moved))
    return moved


def project(rho: QuarticForm, tol_outer: float = TOL_OUTER, max_outer: int = MAX_OUTER,
            tol_inner: float = TOL_INNER, max_inner: int = MAX_INNER, gap_tol: float = GAP_TOL,
            starts: int = STARTS, mode: str = MODE, refine: bool = REFINE, seed: int = SEED,
            init: str = INIT, threads: int = THREADS, max_seconds: float = MAX_SECONDS,
            slide: bool = SLIDE) -> OuterResult:
    """
    Frank-Wolfe projection of rho onto the S-separable set
    Each iteration maximizes f of eta = rho - rho_k over the sphere, stops once
    4 f* - <eta, rho_k> <= gap_tol * max(1, ||rho||_F), otherwise moves toward the
    new atom with the exact step and optionally reoptimizes all weights
    In cone mode, slide additionally moves all atoms with slide_atoms whenever
    that lowers the distance
    Also stops when ||rho_k - rho_k-1||_F <= tol_outer, at max_outer or when
    max_seconds (0 = unlimited) have passed
    """
    atoms = AtomList(rho.n, mode)
    rho_norm = float(np.sqrt(max(inner_product(rho, rho), 0.0)))
    gap_scale = gap_tol * max(1.0, rho_norm)
    distance = rho_norm
    gap = float("inf")
    trace = []
    clamped = []
    stop_reason = "max_outer"
    iterations = 0
    timer = Timer(max_seconds)
    timer.start()

    for iteration in range(1, max_outer + 1):
        if not timer.check_timer():
            stop_reason = "time"
            logger.warning("Time budget of %s s used up after %d iterations", max_seconds, iterations)
            break
        form_k = atoms.as_form()
        eta = DifferenceForm(rho, form_k)
        try:
            inner = multi_start(eta, starts, seed + iteration * SEED_STRIDE, tol_inner, max_inner, init, threads)
        except InnerSolverFailed as error:
            stop_reason = "inner_failed"
            logger.warning("Inner solver failed in iteration %d: %s", iteration, error)
            break

        x = inner.x_star
        # <eta, sigma(x) - rho_k>, the numerator of the exact step
        gap = 4.0 * inner.f_star - (inner_product(rho, form_k) - inner_product(form_k, form_k))
        if gap <= gap_scale:
            stop_reason = "gap"
            trace.append((iteration, distance, gap, 0.0, len(atoms), inner.iterations))
            break
        iterations = iteration

        try:
            raw_alpha = step_size(rho, atoms, x, clamp=False)
        except DegenerateDirection as error:
            stop_reason = "degenerate"
            logger.info("%s", error)
            break
        alpha = float(np.clip(raw_alpha, 0.0, 1.0))
        if alpha != raw_alpha:
            clamped.append(iteration)

        previous = atoms.copy()
        atoms.scale(1.0 - alpha)
        atoms.add(x, alpha)
        _refine(rho, atoms, refine)

        new_distance = _distance(rho, atoms)
        if slide and atoms.mode == CONE and len(atoms):
            moved = slide_atoms(rho, atoms, refine)
            moved_distance = _distance(rho, moved)
            if moved_distance < new_distance:
                atoms, new_distance = moved, moved_distance
        if new_distance > distance:
            # merging into a nearby atom moved the iterate away from rho
            atoms = previous
            stop_reason = "stalled"
            logger.info("Iteration %d did not decrease the distance, keeping the previous iterate", iteration)
            break
        distance = new_distance
        change = lowrank_distance(atoms.weights, atoms.vectors, previous.weights, previous.vectors)
        trace.append((iteration, distance, gap, alpha, len(atoms), inner.iterations))
        logger.debug(
            "Outer %d: distance %.6e, gap %.3e, alpha %.3e, %d atoms", iteration, distance, gap, alpha, len(atoms)
        )
        if change <= tol_outer:
            stop_reason = "stalled"
            break

    result = OuterResult(atoms, distance, gap, iterations, trace, stop_reason=stop_reason, clamped=clamped)
    result.psd_lower_bound = psd_lower_bound(rho)
    result.verdict = verdict(result, rho, result.psd_lower_bound)
    if result.at_cap:
        logger.warning("Projection stopped (%s) with verdict %s", stop_reason, result.verdict)
    return result
