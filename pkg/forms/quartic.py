"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Representations of completely symmetric matrices eta = sum eta_ijkl |i,k><j,l|.
Every representation answers the same questions (B_x contraction, quartic value,
reduced state, trace, spectral bound) without materializing the N^4 tensor.
"""
import itertools
import logging
from typing import Optional

import numpy as np
from scipy.linalg import hankel

from utils.analysis import one_minus_fourth_power
from utils.configloader import DENSE_CAP, SYMMETRY_TOL, UNIT_TOL
from utils.generic import (
    DenseCapExceeded,
    DimensionMismatch,
    MalformedFile,
    NotCompletelySymmetric,
    RepresentationPairUnsupported,
    ZeroVectorAtom,
)

logger = logging.getLogger(__name__)


def sum_counts(n: int, folds: int = 4) -> np.ndarray:
    """
    c(s) = #{(i_1..i_folds) in [0, n)^folds : i_1 + ... + i_folds = s}
    Iterated convolution of the all-ones sequence
    """
    ones = np.ones(n)
    counts = np.ones(1)
    for _ in range(folds):
        counts = np.convolve(counts, ones)
    return counts


def _check_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionMismatch(f"Expected a vector of length {n}, got shape {x.shape}")
    return x


class QuarticForm:
    """
    Base class for completely symmetric matrices of local dimension n
    All solvers only ever talk to a form through this interface
    """

    repr_name = "base"

    def __init__(self, n: int):
        if int(n) != n or n < 2:
            raise DimensionMismatch(f"Local dimension must be an integer >= 2, got {n}")
        self._n = int(n)

    @property
    def n(self) -> int:
        return self._n

    @property
    def spectral_bound(self) -> float:
        """Certified upper bound on the spectral norm of the N^2 x N^2 matrix"""
        raise NotImplementedError

    def b_matrix(self, x) -> np.ndarray:
        """
        (B_x)_ij = sum_kl eta_ijkl x_k x_l, homogeneous of degree 2 in x
        """
        raise NotImplementedError

    def quartic(self, x) -> float:
        """<x,x|eta|x,x> = x^T B_x x, equals 4 f(x)"""
        x = _check_vector(x, self._n)
        return float(x @ self.b_matrix(x) @ x)

    def quartic_many(self, vectors: np.ndarray) -> np.ndarray:
        """quartic() for every row of vectors"""
        return np.array([self.quartic(vector) for vector in vectors], dtype=float)

    def contractions(self, vectors: np.ndarray) -> np.ndarray:
        """Rows B_y y for every row y of vectors, the gradient of quartic() over 4"""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return np.array([self.b_matrix(vector) @ vector for vector in vectors], dtype=float).reshape(vectors.shape)

    def evaluate(self, x) -> float:
        """f(x) = 1/4 <x,x|eta|x,x>"""
        return 0.25 * self.quartic(x)

    def reduced_state(self) -> np.ndarray:
        raise NotImplementedError

    def trace(self) -> float:
        return float(np.trace(self.reduced_state()))

    def dense_available(self) -> bool:
        return self._n <= DENSE_CAP

    def to_dense(self) -> np.ndarray:
        """
        Full tensor with axes (i, j, k, l)
        Only for n up to the dense cap
        """
        if not self.dense_available():
            raise DenseCapExceeded(
                f"Dense reconstruction is capped at N = {DENSE_CAP}, form has N = {self._n}"
            )
        return self._dense()

    def _dense(self) -> np.ndarray:
        raise NotImplementedError

    def to_matrix(self) -> np.ndarray:
        """N^2 x N^2 matrix, entry (i,j,k,l) at row i*N+k and column j*N+l"""
        n = self._n
        return self.to_dense().transpose(0, 2, 1, 3).reshape(n * n, n * n)

    def spectrum(self) -> np.ndarray:
        """
        Eigenvalues of the matrix; eigenvalues not listed are zero
        Dense route by default
        """
        return np.linalg.eigvalsh(self.to_matrix())

    def payload(self) -> dict:
        raise NotImplementedError

    def __sub__(self, other):
        return DifferenceForm(self, other)


class DenseForm(QuarticForm):
    """
    Form holding all N^4 entries, index order (i, j, k, l) with i slowest
    """

    repr_name = "dense"

    def __init__(self, n: int, entries, check: bool = True):
        super().__init__(n)
        entries = np.asarray(entries, dtype=float)
        if entries.size != self._n ** 4:
            raise DimensionMismatch(
                f"Dense payload needs {self._n ** 4} entries for N = {self._n}, got {entries.size}"
            )
        self._entries = entries.reshape((self._n,) * 4).copy()
        self._entries.setflags(write=False)
        if check:
            defect = symmetry_defect(self._entries)
            scale = float(np.max(np.abs(self._entries))) if self._entries.size else 0.0
            if defect > SYMMETRY_TOL * scale:
                raise NotCompletelySymmetric(
                    f"Entries change by {defect:.3e} under an index permutation "
                    f"(tolerance {SYMMETRY_TOL * scale:.3e})"
                )
        self._bound = float(np.linalg.norm(self._entries.ravel()))

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def spectral_bound(self) -> float:
        return self._bound

    def b_matrix(self, x) -> np.ndarray:
        x = _check_vector(x, self._n)
        return (self._entries @ x) @ x

    def reduced_state(self) -> np.ndarray:
        rho_1 = np.einsum("ijkk->ij", self._entries)
        rho_2 = np.einsum("iikl->kl", self._entries)
        scale = np.linalg.norm(rho_1)
        if np.linalg.norm(rho_1 - rho_2) > 1e-10 * scale + 1e-300:
            raise NotCompletelySymmetric("Reduced states of both parties differ")
        return rho_1

    def trace(self) -> float:
        return float(np.einsum("iikk->", self._entries))

    def dense_available(self) -> bool:
        return True

    def _dense(self) -> np.ndarray:
        return self._entries

    def payload(self) -> dict:
        return dict(n=self._n, repr="dense", entries=self._entries.ravel().tolist())


class LowRankForm(QuarticForm):
    """
    eta = sum_m p_m sigma(x_m) with sigma(x) = xx^T (x) xx^T and unit x_m
    Weights may carry any sign
    """

    repr_name = "lowrank"

    def __init__(self, n: int, weights, vectors):
        super().__init__(n)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        vectors = np.asarray(vectors, dtype=float) if weights.size else np.zeros((0, self._n))
        if vectors.ndim == 1:
            vectors = vectors.reshape(1, -1)
        if vectors.shape != (weights.size, self._n):
            raise DimensionMismatch(
                f"Expected {weights.size} vectors of length {self._n}, got shape {vectors.shape}"
            )
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms <= np.finfo(float).tiny) or not np.all(np.isfinite(norms)):
            raise ZeroVectorAtom("Atom vectors must have nonzero finite length")
        # sigma(c x) = c^4 sigma(x): the weight absorbs the scale
        off_unit = np.abs(norms - 1.0) > UNIT_TOL
        self._rescaled = bool(np.any(off_unit))
        if self._rescaled:
            vectors = vectors.copy()
            weights = weights.copy()
            vectors[off_unit] /= norms[off_unit, None]
            weights[off_unit] *= norms[off_unit] ** 4
            logger.info("Normalized %d atom vector(s), weights rescaled", int(off_unit.sum()))
        self._weights = weights.copy()
        self._vectors = vectors.copy()
        self._weights.setflags(write=False)
        self._vectors.setflags(write=False)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def rescaled(self) -> bool:
        """True if some input vector was not unit and got normalized"""
        return self._rescaled

    @property
    def spectral_bound(self) -> float:
        return float(np.sum(np.abs(self._weights)))

    def b_matrix(self, x) -> np.ndarray:
        x = _check_vector(x, self._n)
        overlaps = self._vectors @ x
        scaled = self._weights * overlaps ** 2
        return (self._vectors.T * scaled) @ self._vectors

    def quartic_many(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return ((vectors @ self._vectors.T) ** 4) @ self._weights

    def contractions(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return ((vectors @ self._vectors.T) ** 3 * self._weights) @ self._vectors

    def reduced_state(self) -> np.ndarray:
        return (self._vectors.T * self._weights) @ self._vectors

    def trace(self) -> float:
        return float(np.sum(self._weights))

    def _dense(self) -> np.ndarray:
        pairs = self._vectors[:, :, None] * self._vectors[:, None, :]
        return np.einsum("m,mab,mcd->abcd", self._weights, pairs, pairs)

    def spectrum(self) -> np.ndarray:
        """
        Nonzero eigenvalues of sum p_m v_m v_m^T, v_m = x_m (x) x_m,
        from the L x L matrix G^1/2 P G^1/2 with G_ij = (x_i^T x_j)^2
        """
        if self._weights.size == 0:
            return np.zeros(1)
        gram = (self._vectors @ self._vectors.T) ** 2
        values, basis = np.linalg.eigh(gram)
        root = (basis * np.sqrt(np.clip(values, 0.0, None))) @ basis.T
        return np.linalg.eigvalsh(root @ np.diag(self._weights) @ root)

    def payload(self) -> dict:
        return dict(
            n=self._n,
            repr="lowrank",
            weights=self._weights.tolist(),
            vectors=self._vectors.tolist(),
        )


class SumKernelForm(QuarticForm):
    """
    eta_ijkl = phi(i + j + k + l), phi tabulated on 0 .. 4N-4
    """

    repr_name = "sumkernel"

    def __init__(self, n: int, phi):
        super().__init__(n)
        phi = np.asarray(phi, dtype=float).reshape(-1)
        if phi.size != 4 * self._n - 3:
            raise DimensionMismatch(
                f"Sum kernel needs {4 * self._n - 3} values for N = {self._n}, got {phi.size}"
            )
        self._phi = phi.copy()
        self._phi.setflags(write=False)
        self._counts = sum_counts(self._n)
        self._bound = float(np.sqrt(np.dot(self._counts, self._phi ** 2)))

    @property
    def phi(self) -> np.ndarray:
        return self._phi

    @property
    def spectral_bound(self) -> float:
        return self._bound

    def _hankel(self, weights: np.ndarray) -> np.ndarray:
        # g(t) = sum_s phi(t + s) w(s) for t = 0 .. 2N-2, matrix entry (i, j) = g(i + j)
        g = np.correlate(self._phi, weights, mode="valid")
        return hankel(g[: self._n], g[self._n - 1 :])

    def b_matrix(self, x) -> np.ndarray:
        x = _check_vector(x, self._n)
        autocorrelation = np.convolve(x, x)
        return self._hankel(autocorrelation)

    def reduced_state(self) -> np.ndarray:
        diagonal = np.zeros(2 * self._n - 1)
        diagonal[::2] = 1.0
        return self._hankel(diagonal)

    def _dense(self) -> np.ndarray:
        idx = np.arange(self._n)
        total = (
            idx[:, None, None, None]
            + idx[None, :, None, None]
            + idx[None, None, :, None]
            + idx[None, None, None, :]
        )
        return self._phi[total]

    def payload(self) -> dict:
        return dict(n=self._n, repr="sumkernel", phi=self._phi.tolist())


class DifferenceForm(QuarticForm):
    """
    Formal difference plus - minus, evaluated as the difference of the
    two structured evaluations; never densified on its own
    """

    repr_name = "difference"

    def __init__(self, plus: QuarticForm, minus: QuarticForm):
        if plus.n != minus.n:
            raise DimensionMismatch(f"Cannot subtract N = {minus.n} from N = {plus.n}")
        super().__init__(plus.n)
        self._plus = plus
        self._minus = minus

    @property
    def plus(self) -> QuarticForm:
        return self._plus

    @property
    def minus(self) -> QuarticForm:
        return self._minus

    @property
    def spectral_bound(self) -> float:
        return self._plus.spectral_bound + self._minus.spectral_bound

    def b_matrix(self, x) -> np.ndarray:
        return self._plus.b_matrix(x) - self._minus.b_matrix(x)

    def quartic_many(self, vectors: np.ndarray) -> np.ndarray:
        return self._plus.quartic_many(vectors) - self._minus.quartic_many(vectors)

    def contractions(self, vectors: np.ndarray) -> np.ndarray:
        return self._plus.contractions(vectors) - self._minus.contractions(vectors)

    def reduced_state(self) -> np.ndarray:
        return self._plus.reduced_state() - self._minus.reduced_state()

    def trace(self) -> float:
        return self._plus.trace() - self._minus.trace()

    def _dense(self) -> np.ndarray:
        return self._plus.to_dense() - self._minus.to_dense()

    def payload(self) -> dict:
        return dict(n=self._n, repr="dense", entries=self.to_dense().ravel().tolist())


def symmetry_defect(entries: np.ndarray) -> float:
    """Largest change of any entry under the 24 index permutations"""
    defect = 0.0
    for perm in itertools.permutations(range(4)):
        defect = max(defect, float(np.max(np.abs(entries - entries.transpose(perm)))))
    return defect


def make_form(payload: dict) -> QuarticForm:
    """
    Builds a validated form from a representation payload
    :param payload: dict with "n", "repr" in (lowrank, dense, sumkernel) and
    "weights"/"vectors", "entries" or "phi"
    """
    try:
        n = payload["n"]
        kind = str(payload["repr"]).lower()
    except KeyError as error:
        raise DimensionMismatch(f"Payload misses {error}") from error
    if kind == "lowrank":
        return LowRankForm(n, payload.get("weights", []), payload.get("vectors", []))
    if kind == "dense":
        return DenseForm(n, payload["entries"])
    if kind == "sumkernel":
        return SumKernelForm(n, payload["phi"])
    raise MalformedFile(f'Representation "{kind}" not valid. Pick lowrank, dense or sumkernel.')


def inner_product(a: QuarticForm, b: QuarticForm) -> float:
    """
    Frobenius inner product <a, b> = sum a_ijkl b_ijkl
    Structured pairings first, dense entrywise product as the last resort
    """
    if a.n != b.n:
        raise DimensionMismatch(f"Inner product of N = {a.n} and N = {b.n}")
    if isinstance(a, DifferenceForm):
        return inner_product(a.plus, b) - inner_product(a.minus, b)
    if isinstance(b, DifferenceForm):
        return inner_product(a, b.plus) - inner_product(a, b.minus)
    if isinstance(a, LowRankForm) and isinstance(b, LowRankForm):
        overlaps = a.vectors @ b.vectors.T
        return float(a.weights @ (overlaps ** 4) @ b.weights)
    # <a, sigma(y)> = 4 f_a(y)
    if isinstance(b, LowRankForm):
        return float(np.dot(a.quartic_many(b.vectors), b.weights)) if b.weights.size else 0.0
    if isinstance(a, LowRankForm):
        return inner_product(b, a)
    if isinstance(a, SumKernelForm) and isinstance(b, SumKernelForm):
        return float(np.sum(sum_counts(a.n) * a.phi * b.phi))
    if isinstance(a, DenseForm) and isinstance(b, DenseForm):
        return float(np.vdot(a.entries, b.entries))
    if not (a.dense_available() and b.dense_available()):
        raise RepresentationPairUnsupported(
            f"No structured pairing for {a.repr_name} x {b.repr_name} above N = {DENSE_CAP}"
        )
    return float(np.vdot(a.to_dense(), b.to_dense()))


def frob_norm(form: QuarticForm) -> float:
    return float(np.sqrt(max(inner_product(form, form), 0.0)))


def frob_distance(a: QuarticForm, b: QuarticForm) -> float:
    """||a - b||_F, chord-accurate when both sides are low rank"""
    if isinstance(a, LowRankForm) and isinstance(b, LowRankForm):
        return lowrank_distance(a.weights, a.vectors, b.weights, b.vectors)
    squared = inner_product(a, a) - 2.0 * inner_product(a, b) + inner_product(b, b)
    return float(np.sqrt(max(squared, 0.0)))


def lowrank_distance(weights_a, vectors_a, weights_b, vectors_b, near: float = 0.99) -> float:
    """
    ||sum a_i sigma(x_i) - sum b_j sigma(y_j)||_F for unit x_i, y_j
    Uses ||d||^2 = (sum d)^2 - d^T K d with K = 1 - (z_i^T z_j)^4, where K is
    taken from chord lengths for nearly coincident atoms
    """
    weights = np.concatenate([np.asarray(weights_a, float), -np.asarray(weights_b, float)])
    if weights.size == 0:
        return 0.0
    vectors = np.vstack([np.atleast_2d(vectors_a), np.atleast_2d(vectors_b)]).reshape(weights.size, -1)
    overlaps = np.clip(vectors @ vectors.T, -1.0, 1.0)
    complement = 1.0 - overlaps ** 4
    np.fill_diagonal(complement, 0.0)
    rows, cols = np.nonzero(np.triu(np.abs(overlaps) > near, k=1))
    for i, j in zip(rows, cols):
        complement[i, j] = complement[j, i] = one_minus_fourth_power(vectors[i], vectors[j])
    squared = weights.sum() ** 2 - weights @ complement @ weights
    return float(np.sqrt(max(squared, 0.0)))


def reduced_state(form: QuarticForm) -> np.ndarray:
    """
    rho_1 with (rho_1)_ij = sum_k eta_ijkk; equals rho_2 for completely symmetric forms
    """
    return form.reduced_state()


def atom(x, weight: float = 1.0) -> LowRankForm:
    """weight * sigma(x) as a one-atom form"""
    x = np.asarray(x, dtype=float)
    return LowRankForm(x.size, [weight], [x])


def zero_form(n: int) -> LowRankForm:
    return LowRankForm(n, [], np.zeros((0, n)))


def psd_distance(form: QuarticForm) -> Optional[float]:
    """
    Frobenius distance from the form to the PSD cone (energy of the negative eigenvalues)
    None when no spectrum route exists
    """
    if isinstance(form, LowRankForm) and np.all(form.weights >= 0):
        return 0.0
    if not (isinstance(form, LowRankForm) or form.dense_available()):
        return None
    values = form.spectrum()
    negative = values[values < 0]
    return float(np.sqrt(np.sum(negative ** 2)))
