import numpy as np
import pytest
from scipy.optimize import nnls

from conftest import basis, random_lowrank, random_unit, unit
from forms.generators import gen_example
from forms.quartic import LowRankForm, atom, frob_distance, frob_norm
from solvers.fw_projection import (
    CONVEX,
    INCONCLUSIVE,
    NOT_S_SEPARABLE_CERTIFIED,
    S_SEPARABLE_NUMERICAL,
    AtomList,
    OuterResult,
    project,
    refine_weights,
    slide_atoms,
    step_size,
    verdict,
)
from solvers.weights import atom_gram, fnnls, project_capped_simplex
from utils.generic import DegenerateDirection, InnerSolverFailed
from utils.oracle import naive_tensor, optimality_sample


def atoms_of(n, weights, vectors, mode="cone"):
    return AtomList.from_arrays(n, weights, vectors, mode=mode)


def test_step_size_from_the_empty_iterate(e0):
    rho = atom(e0, 0.5)
    assert step_size(rho, AtomList(2), e0) == pytest.approx(0.5)


def test_step_size_is_clamped(e0):
    rho = atom(e0, 2.0)
    assert step_size(rho, AtomList(2), e0) == 1.0
    assert step_size(rho, AtomList(2), e0, clamp=False) == pytest.approx(2.0)


def test_step_size_between_atoms(e0, e1):
    rho = LowRankForm(2, [0.5, 0.5], [e0, e1])
    # ||sigma(e0) - sigma(e1)||^2 = 2, <rho - sigma(e1), sigma(e0) - sigma(e1)> = 1
    assert step_size(rho, atoms_of(2, [1.0], [e1]), e0) == pytest.approx(0.5)


def test_step_size_without_direction(single_atom, e0):
    with pytest.raises(DegenerateDirection):
        step_size(single_atom, atoms_of(2, [1.0], [e0]), e0)


def test_refined_weights_of_orthogonal_atoms(e0, e1):
    rho = LowRankForm(2, [0.3, 0.7], [e0, e1])
    assert np.allclose(refine_weights(rho, [e0, e1]), [0.3, 0.7], atol=1e-12)
    assert np.allclose(refine_weights(atom(e0), [e0, e1]), [1.0, 0.0], atol=1e-12)


def test_refined_weights_drop_negative_parts(axis_difference, e0, e1):
    assert np.allclose(refine_weights(axis_difference, [e0, e1]), [1.0, 0.0], atol=1e-12)


def test_refined_weights_match_dense_nnls(rng):
    rho = random_lowrank(rng, 3, signed=False)
    vectors = np.array([random_unit(rng, 3) for _ in range(5)])
    design = np.stack([naive_tensor(atom(x)).ravel() for x in vectors], axis=1)
    reference, _ = nnls(design, naive_tensor(rho).ravel())
    assert np.allclose(refine_weights(rho, vectors), reference, atol=1e-8)


def test_refinement_never_increases_the_distance(rng):
    rho = random_lowrank(rng, 3, signed=False)
    vectors = np.array([random_unit(rng, 3) for _ in range(6)])
    current = rng.uniform(0.0, 0.2, 6)
    gram = atom_gram(vectors)
    linear = rho.quartic_many(vectors)

    def half_distance(weights):
        return 0.5 * weights @ gram @ weights - linear @ weights

    refined = refine_weights(rho, vectors, current=current)
    assert half_distance(refined) <= half_distance(current) + 1e-14
    assert np.all(refined >= 0)


def test_capped_refinement(e0, e1):
    rho = LowRankForm(2, [2.0, 2.0], [e0, e1])
    weights = refine_weights(rho, [e0, e1], capped=True)
    assert weights.sum() <= 1.0 + 1e-12
    assert np.allclose(weights, [0.5, 0.5], atol=1e-9)


def test_fnnls_on_a_diagonal_gram():
    assert np.allclose(fnnls(np.eye(3), np.array([1.0, -2.0, 0.5])), [1.0, 0.0, 0.5])


def test_capped_simplex_projection():
    assert np.allclose(project_capped_simplex(np.array([0.2, -0.1])), [0.2, 0.0])
    assert np.allclose(project_capped_simplex(np.array([2.0, 2.0])), [0.5, 0.5])
    assert project_capped_simplex(np.array([0.9, 0.6, -1.0])).sum() == pytest.approx(1.0)


def test_atoms_merge(e0):
    atoms = AtomList(2)
    atoms.add(e0, 0.4)
    atoms.add(-np.array([1.0, 1e-12]), 0.1)
    assert len(atoms) == 1
    assert atoms.weights[0] == pytest.approx(0.5)
    atoms.add(basis(2, 1), 1e-13)
    atoms.prune()
    assert len(atoms) == 1


def test_merging_keeps_the_iterate(e0):
    angle = 1e-6
    nearby = np.array([np.cos(angle), np.sin(angle)])
    atoms = AtomList(2)
    atoms.add(e0, 0.4)
    atoms.add(nearby, 0.1)
    assert len(atoms) == 1
    unmerged = LowRankForm(2, [0.4, 0.1], [e0, nearby])
    assert abs(frob_norm(atoms.as_form()) - frob_norm(unmerged)) <= 1e-8


def test_sliding_moves_a_misplaced_atom(single_atom):
    atoms = atoms_of(2, [0.8], [unit(1.0, 0.3)])
    moved = slide_atoms(single_atom, atoms)
    assert frob_distance(single_atom, moved.as_form()) <= 1e-6
    assert np.allclose(atoms.weights, [0.8])
    assert len(moved) == 1
    assert abs(moved.vectors[0, 0]) == pytest.approx(1.0, abs=1e-6)


def test_sliding_keeps_the_exact_projection(axis_difference, e0):
    moved = slide_atoms(axis_difference, atoms_of(2, [1.0], [e0]))
    assert np.allclose(moved.weights, [1.0], atol=1e-12)
    assert abs(moved.vectors[0] @ e0) == pytest.approx(1.0, abs=1e-12)


def test_sliding_never_loses_to_refinement(rng):
    rho = random_lowrank(rng, 3, count=6, signed=False)
    vectors = np.array([random_unit(rng, 3) for _ in range(4)])
    atoms = atoms_of(3, refine_weights(rho, vectors), vectors)
    atoms.prune()
    moved = slide_atoms(rho, atoms)
    assert frob_distance(rho, moved.as_form()) <= frob_distance(rho, atoms.as_form()) + 1e-12
    assert np.all(moved.weights > 0)


def test_projection_with_and_without_sliding():
    rho = gen_example(1, 3, 0)
    fixed = project(rho, max_outer=20, slide=False)
    sliding = project(rho, max_outer=20)
    for result in (fixed, sliding):
        distances = [row[1] for row in result.trace]
        assert all(b <= a + 1e-14 for a, b in zip(distances, distances[1:]))
    assert sliding.distance < frob_norm(rho)


def test_cone_mass_of_orthogonal_atoms(e0, e1):
    rho = LowRankForm(2, [0.5, 0.5], [e0, e1])
    result = project(rho)
    assert result.distance <= 1e-8
    assert result.approximation.weights.sum() == pytest.approx(1.0, abs=1e-4)
    assert optimality_sample(rho, result.approximation) <= 1e-8


def test_atom_list_rescales_vectors():
    atoms = atoms_of(2, [1.0], [[0.0, 2.0]])
    assert np.allclose(atoms.vectors, [[0.0, 1.0]])
    assert atoms.weights[0] == pytest.approx(16.0)


def test_atom_list_mode():
    with pytest.raises(ValueError):
        AtomList(2, mode="simplex")
    assert AtomList(3, mode=CONVEX).payload()["mode"] == CONVEX


def test_projection_of_an_atom(single_atom):
    result = project(single_atom)
    assert result.distance <= 1e-8
    assert result.verdict == S_SEPARABLE_NUMERICAL
    assert result.stop_reason == "gap"
    assert not result.at_cap


def test_projection_recovers_random_atoms(rng):
    for _ in range(20):
        x = random_unit(rng, 4)
        result = project(atom(x), max_outer=5)
        assert result.distance <= 1e-8
        assert result.iterations <= 5
        assert result.verdict == S_SEPARABLE_NUMERICAL
        assert optimality_sample(atom(x), result.approximation) <= 1e-8


def test_axis_difference_is_certified(axis_difference, e0):
    result = project(axis_difference)
    assert result.distance == pytest.approx(1.0, abs=1e-8)
    assert result.psd_lower_bound == pytest.approx(1.0, abs=1e-10)
    assert result.verdict == NOT_S_SEPARABLE_CERTIFIED
    approximation = result.approximation
    assert len(approximation) == 1
    assert approximation.weights[0] == pytest.approx(1.0, abs=1e-8)
    assert abs(approximation.vectors[0] @ e0) == pytest.approx(1.0, abs=1e-6)
    assert optimality_sample(axis_difference, approximation, samples=500) <= 1e-8


def test_convex_mode_caps_the_mass(e0):
    rho = atom(e0, 2.0)
    result = project(rho, mode=CONVEX)
    assert result.approximation.mode == CONVEX
    assert result.approximation.weights.sum() <= 1.0 + 1e-12
    assert result.distance == pytest.approx(1.0, abs=1e-8)
    assert result.clamped == [1]


def test_distances_decrease_without_refinement():
    rho = gen_example(1, 3, 0)
    result = project(rho, refine=False, max_outer=30)
    distances = [row[1] for row in result.trace]
    assert distances
    assert all(b <= a + 1e-14 for a, b in zip(distances, distances[1:]))
    assert result.distance < frob_norm(rho)


def test_time_budget():
    result = project(gen_example(1, 3, 0), max_seconds=1e-9)
    assert result.stop_reason == "time"
    assert result.at_cap
    assert result.iterations == 0


def test_inner_failure_stops_the_projection(monkeypatch, two_axes):
    def failing(*args, **kwargs):
        raise InnerSolverFailed("Non-finite value in the inner iteration")

    monkeypatch.setattr("solvers.fw_projection.multi_start", failing)
    result = project(two_axes)
    assert result.stop_reason == "inner_failed"
    assert result.at_cap
    assert result.verdict == INCONCLUSIVE


def test_verdicts(single_atom, axis_difference):
    empty = AtomList(2)
    assert verdict(OuterResult(empty, 0.0, 0.0, 1), single_atom) == S_SEPARABLE_NUMERICAL
    assert verdict(OuterResult(empty, 1.0, 0.0, 1), axis_difference, 1.0) == NOT_S_SEPARABLE_CERTIFIED
    assert verdict(OuterResult(empty, 0.5, 0.0, 1), axis_difference, 0.0) == INCONCLUSIVE
    assert verdict(OuterResult(empty, 0.5, 0.0, 1), single_atom, 1e-9) == INCONCLUSIVE


def dense_psd_distance(rho):
    """sqrt of the summed squared negative eigenvalues of the N^2 x N^2 matrix"""
    # complete symmetry makes every flattening of the tensor the same matrix
    matrix = naive_tensor(rho).reshape(rho.n ** 2, rho.n ** 2)
    eigenvalues = np.linalg.eigvalsh(matrix)
    return float(np.sqrt(np.sum(np.minimum(eigenvalues, 0.0) ** 2)))


@pytest.mark.slow
@pytest.mark.parametrize("n", [4, 8])
def test_separable_example_is_recovered(n):
    rho = gen_example(1, n, 0)
    result = project(rho, max_outer=1000)
    assert result.distance <= 1e-4
    assert result.iterations <= 1000
    assert result.verdict != NOT_S_SEPARABLE_CERTIFIED
    tolerance = 1e-8 * max(1.0, frob_norm(rho))
    assert optimality_sample(rho, result.approximation, samples=1000) <= tolerance


@pytest.mark.slow
def test_cone_mass_matches_the_trace():
    rng = np.random.default_rng(7)
    vectors = np.array([random_unit(rng, 3) for _ in range(3)])
    rho = LowRankForm(3, [0.2, 0.3, 0.5], vectors)
    result = project(rho)
    assert result.distance <= 1e-6
    assert result.approximation.weights.sum() == pytest.approx(1.0, abs=1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("example_id", [2, 3, 4])
def test_examples_respect_the_psd_bound(example_id):
    rho = gen_example(example_id, 4, 0)
    result = project(rho)
    distances = [row[1] for row in result.trace]
    assert all(b <= a + 1e-12 for a, b in zip(distances, distances[1:]))
    assert result.distance >= dense_psd_distance(rho) - 1e-8
    tolerance = 1e-8 * max(1.0, frob_norm(rho))
    assert optimality_sample(rho, result.approximation, samples=1000) <= tolerance
