"""
SymSep
Best S-separable approximation of completely symmetric matrices
Licensed under GNU General Public License v3.0

Structural facts about a completely symmetric form and the sufficient
S-separability conditions they imply.
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from forms.quartic import DenseForm, LowRankForm, QuarticForm, symmetry_defect
from utils.configloader import PSD_TOL, RANK_THRESHOLD, REDUCIBILITY_TOL, SYMMETRY_TOL

logger = logging.getLogger(__name__)

SSEP_RANK1 = "SSEP_RANK1"
SSEP_N_LE_2 = "SSEP_N_LE_2"
SSEP_RANK_LE_N = "SSEP_RANK_LE_N"
SSEP_RANK_LE_3 = "SSEP_RANK_LE_3"
SSEP_BY_BLOCKS = "SSEP_BY_BLOCKS"
INCONCLUSIVE = "INCONCLUSIVE"
NOT_A_STATE = "NOT_A_STATE"

SEPARABLE_VERDICTS = (SSEP_RANK1, SSEP_N_LE_2, SSEP_RANK_LE_N, SSEP_RANK_LE_3, SSEP_BY_BLOCKS)


@dataclass
class Certificate:
    n: int
    is_completely_symmetric: bool
    trace: float
    min_eigenvalue: Optional[float]
    rank: Optional[int]
    reduced_rank: int
    supported: bool
    reducibility_split: Optional[List[List[int]]]
    theorem1_verdict: str
    unavailable: List[str] = field(default_factory=list)

    @property
    def separable(self) -> bool:
        return self.theorem1_verdict in SEPARABLE_VERDICTS

    def to_dict(self) -> dict:
        return asdict(self)


def numerical_rank(values: np.ndarray, threshold: float = RANK_THRESHOLD) -> int:
    """Number of |values| above threshold * max |values|"""
    magnitudes = np.abs(np.asarray(values, dtype=float))
    if magnitudes.size == 0 or magnitudes.max() == 0.0:
        return 0
    return int(np.count_nonzero(magnitudes > threshold * magnitudes.max()))


def reducibility_split(entries: np.ndarray, tol: float = REDUCIBILITY_TOL) -> Optional[List[List[int]]]:
    """
    Connected components of the index graph: a and b are joined whenever some
    entry above tol carries both indices
    :return: sorted blocks, or None if the index set does not split
    """
    n = entries.shape[0]
    support = np.argwhere(np.abs(entries) > tol)
    if support.size == 0:
        # zero tensor: every index is its own block
        return [[index] for index in range(n)] if n > 1 else None
    # chaining i-j, j-k, k-l joins all four indices of an entry
    rows = np.concatenate([support[:, 0], support[:, 1], support[:, 2]])
    cols = np.concatenate([support[:, 1], support[:, 2], support[:, 3]])
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    if count < 2:
        return None
    blocks = [sorted(np.flatnonzero(labels == label).tolist()) for label in range(count)]
    return sorted(blocks, key=lambda block: block[0])


def _block_separable(entries: np.ndarray, block: List[int]) -> bool:
    if len(block) == 1:
        index = block[0]
        return entries[index, index, index, index] >= -PSD_TOL
    grid = np.ix_(block, block, block, block)
    sub_form = DenseForm(len(block), entries[grid], check=False)
    return structural_certificate(sub_form).separable


def _spectrum(form: QuarticForm) -> Optional[np.ndarray]:
    if isinstance(form, LowRankForm):
        values = form.spectrum()
        # the antisymmetric subspace is always in the kernel
        return np.append(values, 0.0)
    if form.dense_available():
        return form.spectrum()
    return None


def structural_certificate(form: QuarticForm) -> Certificate:
    """
    Collects symmetry, trace, spectrum, rank and reducibility facts of the form and
    applies the sufficient conditions in this order: not a state, rank one, two
    effective dimensions, supported with rank <= N, rank <= 3, separable blocks
    Fields that need the dense tensor are listed in unavailable above the dense cap
    """
    n = form.n
    unavailable = []
    entries = form.to_dense() if form.dense_available() else None

    if isinstance(form, DenseForm):
        scale = float(np.max(np.abs(form.entries))) if form.entries.size else 0.0
        is_symmetric = symmetry_defect(form.entries) <= SYMMETRY_TOL * scale
    else:
        is_symmetric = True

    trace = form.trace()
    rho_1 = form.reduced_state()
    reduced_rank = numerical_rank(np.linalg.eigvalsh(0.5 * (rho_1 + rho_1.T)))
    supported = reduced_rank == n

    values = _spectrum(form)
    if values is None:
        min_eigenvalue, rank, max_magnitude = None, None, None
        unavailable += ["min_eigenvalue", "rank"]
    else:
        min_eigenvalue = float(values.min())
        rank = numerical_rank(values)
        max_magnitude = float(np.max(np.abs(values)))

    if entries is None:
        split = None
        unavailable.append("reducibility_split")
    else:
        split = reducibility_split(entries)

    if trace <= PSD_TOL:
        verdict = NOT_A_STATE
    elif min_eigenvalue is not None and min_eigenvalue < -PSD_TOL * max(1.0, max_magnitude):
        verdict = NOT_A_STATE
    elif min_eigenvalue is None:
        verdict = INCONCLUSIVE
    elif rank == 1:
        verdict = SSEP_RANK1
    elif n <= 2 or reduced_rank <= 2:
        verdict = SSEP_N_LE_2
    elif supported and rank <= n:
        verdict = SSEP_RANK_LE_N
    elif rank <= 3:
        verdict = SSEP_RANK_LE_3
    elif split is not None and all(_block_separable(entries, block) for block in split):
        verdict = SSEP_BY_BLOCKS
    else:
        verdict = INCONCLUSIVE

    logger.debug("Certificate for N = %d: rank %s, verdict %s", n, rank, verdict)
    return Certificate(
        n=n,
        is_completely_symmetric=bool(is_symmetric),
        trace=float(trace),
        min_eigenvalue=min_eigenvalue,
        rank=rank,
        reduced_rank=reduced_rank,
        supported=bool(supported),
        reducibility_split=split,
        theorem1_verdict=verdict,
        unavailable=unavailable,
    )
