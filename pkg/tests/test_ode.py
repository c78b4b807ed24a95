"""
Tests for the integrator and the fluid, central limit and moment engines
"""
import math

import numpy as np
import pytest
import sympy

from src.errors import StiffnessError, UnsupportedRateError
from src.model.parser import parse_model
from src.ode.fluid import chained_solve, cla_moments, cla_solve, fluid_solve
from src.ode.moments import (MomentSpec, mean_and_covariance, moment_expressions, moment_solve,
                             raw_moments)
from src.ode.solver import OdeSystem, constant_solution, integrate
from src.synchronize.product import synchronize


def exponential_decay(rate=1.0):
    return OdeSystem(dimension=1, rhs=lambda t, y: -rate * y, labels=('y',))


def test_integrate_exponential():
    solution = integrate(exponential_decay(), 0.0, 1.0, [1.0])
    assert solution.y_end[0] == pytest.approx(math.exp(-1), rel=1e-6)
    grid = np.linspace(0, 1, 17)
    np.testing.assert_allclose(solution(grid)[:, 0], np.exp(-grid), rtol=1e-5)
    assert solution.component('y', 0.5) == pytest.approx(math.exp(-0.5), rel=1e-5)
    assert solution.stats['steps'] > 0


def test_integrate_rejects_empty_interval():
    with pytest.raises(ValueError):
        integrate(exponential_decay(), 1.0, 1.0, [1.0])


def test_stiff_problem_exhausts_step_budget():
    with pytest.raises(StiffnessError):
        integrate(exponential_decay(1e4), 0.0, 100.0, [1.0], cfg={'max_steps': 50})


def test_dense_output_outside_range():
    solution = integrate(exponential_decay(), 0.0, 1.0, [1.0])
    with pytest.raises(ValueError):
        solution(1.5)


def test_concatenate_requires_touching_pieces():
    first = integrate(exponential_decay(), 0.0, 1.0, [1.0])
    second = integrate(exponential_decay(), 2.0, 3.0, [1.0])
    with pytest.raises(ValueError):
        first.concatenate(second)
    joined = first.concatenate(integrate(exponential_decay(), 1.0, 2.0, first.y_end))
    assert joined.t_end == 2.0
    assert joined(2.0)[0] == pytest.approx(math.exp(-2), rel=1e-6)
    assert constant_solution(('y',), 0.0, [3.0])(0.0)[0] == 3.0


def test_fluid_limit_of_decay(decay):
    solution = fluid_solve(decay, 2.0)
    frame = solution.to_frame(points=5)
    assert list(frame.columns) == ['t', 'A', 'B']
    np.testing.assert_allclose(frame['A'], np.exp(-frame['t']), rtol=1e-5)


def test_fluid_limit_conserves_mass(epidemic):
    solution = fluid_solve(epidemic, 50.0)
    totals = solution(np.linspace(0, 50, 11)).sum(axis=1)
    np.testing.assert_allclose(totals, 1.0, atol=1e-8)


def test_central_limit_of_decay(decay):
    T = 1.0
    mean, cov = cla_moments(cla_solve(decay, T), decay.N, T)
    p = math.exp(-T)
    assert mean[0] == pytest.approx(decay.N * p, rel=1e-5)
    assert cov[0, 0] == pytest.approx(decay.N * p * (1 - p), rel=1e-4)
    assert cov[0, 1] == pytest.approx(-decay.N * p * (1 - p), rel=1e-4)


def test_central_limit_initial_covariance_must_be_symmetric(decay):
    with pytest.raises(ValueError):
        cla_solve(decay, 1.0, inits=(decay.initial_density, np.zeros(2),
                                     np.array([[0.0, 1.0], [0.0, 0.0]])))


def test_moments_of_linear_model_are_exact(decay):
    spec = MomentSpec.for_model(decay, 2)
    solution = moment_solve(decay, spec, 1.0)
    mean, cov = mean_and_covariance(solution, spec, 1.0)
    p = math.exp(-1)
    assert mean[0] == pytest.approx(10 * p, rel=1e-5)
    assert cov[0, 0] == pytest.approx(10 * p * (1 - p), rel=1e-4)
    second = raw_moments(solution, spec, 'A', 1.0)[1]
    assert second == pytest.approx(10 * p * (1 - p) + (10 * p) ** 2, rel=1e-4)


def test_moment_engine_needs_polynomial_rates():
    model = parse_model("state A B; param k = 1; population N = 10; "
                        "trans t : A->B @ k*X_A*X_A/(X_A+X_B); init A = N;")
    with pytest.raises(UnsupportedRateError):
        moment_solve(model, MomentSpec.for_model(model, 2), 1.0)


def test_chained_solve_matches_single_solve(decay, decay_properties):
    pm = synchronize(decay, decay_properties.dtas['Dec'], 1)
    single = fluid_solve(pm.regions[0], 1.0)
    chained = chained_solve([pm.regions[0], pm.regions[0]], [0.0, 0.4, 1.0], 'fluid')
    np.testing.assert_allclose(chained(1.0), single(1.0), rtol=1e-6, atol=1e-9)
    final = chained.component('Final', 1.0)
    assert final == pytest.approx(1 - math.exp(-1), rel=1e-5)


@pytest.mark.parametrize('order', [2, 3])
def test_unclosed_moment_equations_do_not_depend_on_the_order(epidemic, order):
    lower = moment_expressions(epidemic, MomentSpec.for_model(epidemic, order))
    higher = moment_expressions(epidemic, MomentSpec.for_model(epidemic, order + 1))
    # quadratic rates: equations of degree <= m - 1 only reach moments of degree <= m
    shared = [beta for beta in lower if sum(beta) <= order - 1]
    assert shared
    for beta in shared:
        assert sympy.expand(lower[beta] - higher[beta]) == 0, beta


@pytest.mark.parametrize('name', ['D1', 'Twice'])
def test_central_limit_covariance_stays_symmetric_positive_semidefinite(
        epidemic, epidemic_properties, name):
    d = epidemic_properties.dtas[name]
    T = 50.0 if name == 'D1' else 4.0
    pm = synchronize(epidemic, d, T)
    solution = chained_solve(pm.regions, [float(t) for t in pm.times], 'cla')
    _, covariances = cla_moments(solution, epidemic.N, np.linspace(0.0, T, 26))
    for cov in covariances:
        np.testing.assert_allclose(cov, cov.T, atol=1e-9)
        assert np.linalg.eigvalsh(cov).min() >= -1e-6 * max(1.0, np.abs(cov).max())
    plain = cla_solve(epidemic, T)
    for t in np.linspace(0.0, T, 11):
        _, cov = cla_moments(plain, epidemic.N, t)
        np.testing.assert_allclose(cov, cov.T, atol=1e-9)
        assert np.linalg.eigvalsh(cov).min() >= -1e-6 * max(1.0, np.abs(cov).max())
