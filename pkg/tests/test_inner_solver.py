import numpy as np
import pytest

from conftest import basis, random_lowrank, random_unit, unit
from forms.generators import gen_example
from solvers.inner_solver import (
    b_matrix,
    derivatives,
    inner_solve,
    line_search_2d,
    multi_start,
    power_method,
    sqp_step,
    start_point,
    stationary_numerator,
)
from utils.generic import MaxIterationsReached, NearParallelInputs
from utils.oracle import fd_derivatives, grid_max


def kkt_residual(form, x):
    grad = b_matrix(form, x) @ x
    return np.linalg.norm(grad - float(x @ grad) * x)


def test_b_matrix_of_a_single_atom(single_atom):
    assert np.allclose(b_matrix(single_atom, unit(1, 1)), [[0.5, 0.0], [0.0, 0.0]])
    assert np.allclose(b_matrix(single_atom, basis(2, 1)), np.zeros((2, 2)))


def test_derivatives_at_the_atom(single_atom, e0):
    f, grad, hess = derivatives(single_atom, e0)
    assert f == pytest.approx(0.25)
    assert np.allclose(grad, e0)
    assert np.allclose(hess, [[3.0, 0.0], [0.0, 0.0]])


def test_derivatives_on_the_diagonal(two_axes):
    f, grad, hess = derivatives(two_axes, unit(1, 1))
    assert f == pytest.approx(0.125)
    assert np.allclose(grad, 0.5 * unit(1, 1))
    assert np.allclose(hess, 1.5 * np.eye(2))


@pytest.mark.parametrize("n", [2, 4, 8])
def test_derivatives_match_finite_differences(rng, n):
    for _ in range(34):
        form = random_lowrank(rng, n)
        scale = max(1.0, form.spectral_bound)
        x = random_unit(rng, n)
        _, grad, hess = derivatives(form, x)
        fd_grad, fd_hess = fd_derivatives(form, x)
        assert np.max(np.abs(grad - fd_grad)) <= 1e-6 * scale
        assert np.max(np.abs(hess - fd_hess)) <= 1e-5 * scale


def test_exchange_identity(rng):
    forms = [random_lowrank(rng, 4), gen_example(4, 4, 0), gen_example(2, 3, 1), gen_example(3, 5, 0)]
    for trial in range(1000):
        form = forms[trial % len(forms)]
        x, y = random_unit(rng, form.n), random_unit(rng, form.n)
        left = float(x @ b_matrix(form, y) @ x)
        right = float(y @ b_matrix(form, x) @ y)
        assert left == pytest.approx(right, rel=1e-12, abs=1e-14)


def test_hessian_and_lipschitz_bounds(rng):
    for trial in range(1000):
        form = random_lowrank(rng, 2 + trial % 4)
        bound = form.spectral_bound
        x, y = random_unit(rng, form.n), random_unit(rng, form.n)
        _, grad_x, hess_x = derivatives(form, x)
        _, grad_y, hess_y = derivatives(form, y)
        step = np.linalg.norm(x - y)
        assert np.linalg.norm(hess_x, 2) <= 3.0 * bound + 1e-12
        assert np.linalg.norm(grad_x - grad_y) <= 3.0 * bound * step + 1e-12
        assert np.linalg.norm(hess_x - hess_y, 2) <= 6.0 * bound * step + 1e-12


def test_power_method_at_a_fixed_point(single_atom, e0):
    result = power_method(single_atom, e0)
    assert result.converged
    assert result.iterations == 1
    assert np.allclose(result.x_star, e0)
    assert result.f_star == pytest.approx(0.25)


def test_power_method_stays_on_the_diagonal_saddle(two_axes):
    result = power_method(two_axes, unit(1, 1))
    assert result.converged
    assert result.iterations == 1
    assert result.f_star == pytest.approx(0.125)


def test_power_method_reaches_the_axis(two_axes, e0):
    result = power_method(two_axes, [0.8, 0.6], tol=1e-10, maxit=500)
    assert result.converged
    assert np.allclose(result.x_star, e0, atol=1e-8)
    assert result.f_star == pytest.approx(0.25, abs=1e-12)
    assert result.lambda_star == pytest.approx(1.0, abs=1e-11)


def test_power_method_is_monotone(rng):
    for n in (3, 5):
        form = random_lowrank(rng, n)
        result = power_method(form, random_unit(rng, n), tol=1e-10, maxit=200)
        values = [row[1] for row in result.trace]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        assert all(row[3] == "PM" for row in result.trace)


def test_power_method_strict_cap(two_axes):
    with pytest.raises(MaxIterationsReached) as raised:
        power_method(two_axes, [0.8, 0.6], tol=1e-14, maxit=3, strict=True)
    assert raised.value.result.iterations == 3
    assert not raised.value.result.converged


def test_sqp_step_keeps_a_stationary_point(single_atom, e0):
    assert np.array_equal(sqp_step(single_atom, e0, 1.0), e0)


def test_sqp_step_reduces_the_residual(two_axes):
    x = np.array([np.cos(0.1), np.sin(0.1)])
    lam = float(x @ b_matrix(two_axes, x) @ x)
    x_next = sqp_step(two_axes, x, lam)
    assert np.linalg.norm(x_next) == pytest.approx(1.0)
    assert kkt_residual(two_axes, x) > 10.0 * kkt_residual(two_axes, x_next)


def test_repeated_sqp_steps_converge(two_axes):
    x = np.array([np.cos(0.1), np.sin(0.1)])
    for _ in range(6):
        x = sqp_step(two_axes, x, float(x @ b_matrix(two_axes, x) @ x))
    assert kkt_residual(two_axes, x) <= 1e-12
    assert abs(x[0]) == pytest.approx(1.0)


def test_stationary_numerator_of_two_axes():
    assert np.allclose(stationary_numerator([0.25, 0.0, 0.0, 0.0, 0.25]), [0.0, -1.0, 0.0, 1.0])


def test_line_search_finds_the_axis(two_axes):
    x = np.array([np.cos(0.3), np.sin(0.3)])
    y = np.array([np.cos(1.0), np.sin(1.0)])
    v, value = line_search_2d(two_axes, x, y)
    assert value == pytest.approx(0.25, abs=1e-12)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert max(abs(v[0]), abs(v[1])) == pytest.approx(1.0, abs=1e-8)


def test_line_search_never_loses_to_its_inputs(rng):
    for trial in range(30):
        form = random_lowrank(rng, 2 + trial % 5)
        x, y = random_unit(rng, form.n), random_unit(rng, form.n)
        v, value = line_search_2d(form, x, y)
        assert value >= max(form.evaluate(x), form.evaluate(y)) - 1e-14
        assert value == pytest.approx(form.evaluate(v), abs=1e-13)


def test_line_search_is_global_on_the_span(rng):
    angles = np.linspace(0.0, np.pi, 20001)
    for _ in range(10):
        form = random_lowrank(rng, 4)
        x, y = random_unit(rng, 4), random_unit(rng, 4)
        z = y - (x @ y) * x
        z /= np.linalg.norm(z)
        grid = max(form.evaluate(np.cos(t) * x + np.sin(t) * z) for t in angles)
        _, value = line_search_2d(form, x, y)
        assert value >= grid - 1e-10 * max(1.0, form.spectral_bound)


def test_line_search_rejects_parallel_inputs(rng):
    form = random_lowrank(rng, 3)
    x = random_unit(rng, 3)
    with pytest.raises(NearParallelInputs) as raised:
        line_search_2d(form, x, -x)
    assert raised.value.value == pytest.approx(form.evaluate(x))


def test_inner_solve_single_atom(single_atom, e0):
    result = inner_solve(single_atom, [0.8, 0.6])
    assert result.converged
    assert np.allclose(result.x_star, e0, atol=1e-10)
    assert result.f_star == pytest.approx(0.25, abs=1e-14)
    assert result.lambda_star == pytest.approx(1.0, abs=1e-13)


def test_inner_solve_two_axes_lands_on_an_axis(two_axes):
    result = inner_solve(two_axes, [0.8, 0.6])
    assert result.converged
    assert result.f_star == pytest.approx(0.25, abs=1e-14)
    assert max(abs(result.x_star)) == pytest.approx(1.0, abs=1e-10)
    assert np.array_equal(result.iterates[-1], result.x_star)


def test_inner_solve_satisfies_kkt(rng):
    for n in (3, 4, 6):
        form = random_lowrank(rng, n)
        result = inner_solve(form, random_unit(rng, n), tol=1e-12, maxit=500)
        assert result.converged
        assert result.lambda_star == pytest.approx(4.0 * result.f_star, rel=1e-12, abs=1e-14)
        assert kkt_residual(form, result.x_star) <= 1e-8 * max(1.0, form.spectral_bound)
        values = [row[1] for row in result.trace]
        assert all(b >= a - 1e-14 for a, b in zip(values, values[1:]))


def test_inner_solve_converges_quadratically(two_axes):
    x0 = np.array([np.cos(0.3), np.sin(0.3)])
    result = inner_solve(two_axes, x0, keep_iterates=True)
    assert result.converged
    assert result.f_star == pytest.approx(0.25, abs=1e-14)
    assert max(abs(result.x_star)) == pytest.approx(1.0, abs=1e-10)
    assert np.array_equal(result.iterates[-1], result.x_star)

    # in two dimensions the span search is exact, so the rate is read off the SQP steps
    x = np.array([np.cos(0.1), np.sin(0.1)])
    errors = [abs(x[1])]
    for _ in range(6):
        x = sqp_step(two_axes, x, float(x @ b_matrix(two_axes, x) @ x))
        errors.append(abs(x[1]))
    assert abs(x[0]) == pytest.approx(1.0)
    checked = 0
    for current, following in zip(errors, errors[1:]):
        if current > 1e-12:
            assert following <= 100.0 * current ** 2
            checked += 1
    assert checked >= 2


def test_inner_solve_strict_cap():
    form = gen_example(1, 8, 0)
    with pytest.raises(MaxIterationsReached) as raised:
        inner_solve(form, start_point(0, 0, 8), tol=1e-14, maxit=1, strict=True)
    assert raised.value.result.iterations == 1


def test_inner_solve_cap_without_strict():
    form = gen_example(1, 8, 0)
    result = inner_solve(form, start_point(0, 0, 8), tol=1e-14, maxit=1)
    assert not result.converged
    assert len(result.trace) == 1


def test_multi_start_finds_the_maximum(two_axes):
    result = multi_start(two_axes, starts=20, seed=3)
    assert result.f_star == pytest.approx(0.25, abs=1e-14)


def test_single_start_is_plain_inner_solve(rng):
    form = random_lowrank(rng, 4)
    best = multi_start(form, starts=1, seed=7)
    direct = inner_solve(form, start_point(7, 0, 4))
    assert np.array_equal(best.x_star, direct.x_star)
    assert best.f_star == direct.f_star
    assert best.start == 0


def test_multi_start_ignores_thread_count(rng):
    form = random_lowrank(rng, 4)
    serial = multi_start(form, starts=4, seed=5, threads=1)
    parallel = multi_start(form, starts=4, seed=5, threads=2)
    assert np.array_equal(serial.x_star, parallel.x_star)
    assert serial.start == parallel.start


def test_multi_start_needs_a_start(single_atom):
    with pytest.raises(ValueError):
        multi_start(single_atom, starts=0)


def test_start_points_are_seeded():
    assert np.array_equal(start_point(4, 2, 5), start_point(4, 2, 5))
    assert not np.array_equal(start_point(4, 2, 5), start_point(4, 3, 5))
    assert np.all(start_point(1, 0, 6, init="uniform") > 0)


@pytest.mark.slow
@pytest.mark.parametrize("example_id", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
def test_examples_converge(example_id, n):
    form = gen_example(example_id, n, 0)
    result = multi_start(form, starts=3, seed=0, tol=1e-12, maxit=500)
    assert result.converged
    assert result.iterations <= 500
    values = [row[1] for row in result.trace]
    assert all(b >= a - 1e-14 for a, b in zip(values, values[1:]))
    assert kkt_residual(form, result.x_star) <= 1e-8 * max(1.0, form.spectral_bound)


@pytest.mark.slow
def test_multi_start_matches_grid_search_in_two_dimensions(rng):
    hits = 0
    for _ in range(100):
        form = random_lowrank(rng, 2)
        _, reference = grid_max(form)
        result = multi_start(form, starts=20, seed=int(rng.integers(1 << 30)))
        hits += result.f_star >= reference - 1e-8
    assert hits >= 95
