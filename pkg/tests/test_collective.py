"""
Tests for threshold intervals, Gaussian and moment estimates and verdict trees
"""
import math
from fractions import Fraction

import pytest
from scipy import stats

from src.checking.collective import (GaussianEstimate, GlobalEstimate, GlobalFormulaChecker,
                                     PathGlobalChecker, check_global_formula, check_path_global,
                                     check_state_global, finite_size_correct,
                                     gaussian_interval_prob, uses_closure)
from src.errors import GlobalCheckError, StiffnessError
from src.model.parser import parse_model
from src.properties.logic import csl_atom
from src.properties.parser import parse_property
from tests.conftest import DECAY_MODEL, DECAY_PROPERTIES

LARGE_N = 400
P_LEFT = math.exp(-1)


@pytest.fixture
def large_decay():
    return parse_model(DECAY_MODEL, n=LARGE_N)


def binomial_mass(n, p, lo, hi):
    dist = stats.binom(n, p)
    return float(dist.cdf(hi) - dist.cdf(lo - 1))


def test_correction_widens_to_half_integers():
    interval = finite_size_correct((Fraction(3, 2), Fraction(7, 2)), 10)
    assert (interval.corrected_lower, interval.corrected_upper) == (1.5, 3.5)
    assert interval.corrected and not interval.empty


def test_correction_opens_at_population_bounds():
    interval = finite_size_correct((Fraction(0), Fraction(10)), 10)
    assert interval.corrected_lower == -math.inf
    assert interval.corrected_upper == math.inf


def test_correction_without_integers_is_empty():
    interval = finite_size_correct((Fraction(21, 10), Fraction(29, 10)), 10)
    assert interval.empty


def test_uncorrected_interval_keeps_bounds():
    interval = finite_size_correct((Fraction(3, 2), Fraction(7, 2)), 10, correct=False)
    assert (interval.corrected_lower, interval.corrected_upper) == (1.5, 3.5)
    assert not interval.corrected
    with pytest.raises(ValueError):
        finite_size_correct((Fraction(3), Fraction(2)), 10)


def test_gaussian_interval_probability():
    assert gaussian_interval_prob(GaussianEstimate(0.0, 1.0), -1.96, 1.96) == \
        pytest.approx(0.95, abs=1e-3)
    assert gaussian_interval_prob(GaussianEstimate(0.0, 1.0), 0.0, math.inf) == \
        pytest.approx(0.5)


def test_degenerate_gaussian_is_an_indicator():
    point = GaussianEstimate(3.0, 0.0)
    assert gaussian_interval_prob(point, 2.5, 3.5) == 1.0
    assert gaussian_interval_prob(point, 3.5, 4.5) == 0.0
    with pytest.raises(ValueError):
        GaussianEstimate(0.0, -1.0)


def test_central_limit_estimate_of_accepted_agents(large_decay, decay_properties):
    dec = decay_properties.dtas['Dec']
    bounds = (Fraction(240), Fraction(800, 3))
    estimate = check_path_global(large_decay, dec, bounds, 1, 'cla')
    p = 1 - P_LEFT
    assert estimate.mean == pytest.approx(LARGE_N * p, rel=1e-4)
    assert estimate.variance == pytest.approx(LARGE_N * p * (1 - p), rel=1e-3)
    assert estimate.probability == pytest.approx(binomial_mass(LARGE_N, p, 240, 266), abs=0.015)


@pytest.mark.parametrize('method', ['moments(2)', 'maxent(2)'])
def test_moment_based_estimates(large_decay, decay_properties, method):
    dec = decay_properties.dtas['Dec']
    estimate = check_path_global(large_decay, dec, (Fraction(240), Fraction(800, 3)), 1, method)
    assert estimate.method == method
    assert estimate.probability == pytest.approx(
        binomial_mass(LARGE_N, 1 - P_LEFT, 240, 266), abs=0.02)


@pytest.mark.parametrize('method, order, closure', [
    ('cla', None, False),
    ('maxent', 2, False),
    ('maxent', 4, True),
    ('moments', 2, True),
])
def test_moment_source(method, order, closure):
    assert uses_closure(method, order) is closure


def test_higher_order_maxent_uses_closure_moments(large_decay, decay_properties):
    dec = decay_properties.dtas['Dec']
    bounds = (Fraction(245), Fraction(260))
    maxent = check_path_global(large_decay, dec, bounds, 1, 'maxent(4)')
    moments = check_path_global(large_decay, dec, bounds, 1, 'moments(4)')
    assert maxent.method == 'maxent(4)'
    assert 'fluid_final_fraction' not in maxent.diagnostics
    assert maxent.probability == pytest.approx(moments.probability, abs=1e-9)
    assert maxent.probability == pytest.approx(binomial_mass(LARGE_N, 1 - P_LEFT, 245, 260),
                                               abs=0.01)


def test_two_moment_maxent_matches_cla(large_decay, decay_properties):
    dec = decay_properties.dtas['Dec']
    bounds = (Fraction(240), Fraction(800, 3))
    cla = check_path_global(large_decay, dec, bounds, 1, 'cla', correct=False)
    maxent = check_path_global(large_decay, dec, bounds, 1, 'maxent(2)', correct=False)
    assert maxent.diagnostics['reconstruction'] == 'maxent'
    assert maxent.probability == pytest.approx(cla.probability, abs=1e-4)


def test_state_threshold_maxent_uses_closure(large_decay):
    bounds = (Fraction(140), Fraction(155))
    maxent = check_state_global(large_decay, csl_atom(['A']), bounds, 1, 'maxent(3)')
    moments = check_state_global(large_decay, csl_atom(['A']), bounds, 1, 'moments(3)')
    assert maxent.method == 'maxent(3)'
    assert maxent.probability == pytest.approx(moments.probability, abs=1e-9)


@pytest.mark.parametrize('method', ['cla', 'moments(3)', 'maxent(2)', 'maxent(4)'])
@pytest.mark.parametrize('correct', [True, False])
def test_wider_intervals_are_at_least_as_likely(large_decay, decay_properties, method, correct):
    checker = PathGlobalChecker(large_decay, decay_properties.dtas['Dec'], 1, method)
    nested = [(252, 253), (250, 255), (245, 260), (240, 270), (220, 290), (0, LARGE_N)]
    probabilities = [checker.estimate((Fraction(lo), Fraction(hi)), correct=correct).probability
                     for lo, hi in nested]
    assert all(a <= b + 1e-6 for a, b in zip(probabilities, probabilities[1:])), probabilities
    assert probabilities[-1] == pytest.approx(1.0, abs=1e-3)


def test_one_solve_serves_shorter_horizons(large_decay, decay_properties):
    checker = PathGlobalChecker(large_decay, decay_properties.dtas['Dec'], 1, 'cla')
    half = checker.estimate((Fraction(0), Fraction(LARGE_N)), 0.5)
    assert half.mean == pytest.approx(LARGE_N * (1 - math.exp(-0.5)), rel=1e-4)
    assert half.probability == pytest.approx(1.0)
    with pytest.raises(ValueError):
        checker.estimate((Fraction(0), Fraction(LARGE_N)), 2.0)


def test_path_checker_rejects_local_methods(large_decay, decay_properties):
    with pytest.raises(ValueError):
        PathGlobalChecker(large_decay, decay_properties.dtas['Dec'], 1, 'fluid')


def test_state_threshold(large_decay):
    estimate = check_state_global(large_decay, csl_atom(['A']), (Fraction(140), Fraction(155)),
                                  1, 'cla')
    assert estimate.diagnostics['satisfying_states'] == ['A']
    assert estimate.probability == pytest.approx(binomial_mass(LARGE_N, P_LEFT, 140, 155),
                                                 abs=0.015)


def test_state_threshold_at_time_zero(large_decay):
    estimate = check_state_global(large_decay, csl_atom(['A']), (Fraction(LARGE_N), Fraction(LARGE_N)),
                                  0, 'cla')
    assert estimate.probability == 1.0


def test_global_formula_on_file(large_decay):
    props = parse_property(DECAY_PROPERTIES)
    tree = check_global_formula(props.main(), large_decay, 'cla')
    assert tree.type == 'path'
    assert tree.verdict is (tree.estimate >= 0.5)
    assert tree.to_dict()['details']['interval']['corrected']


def stub_estimator(probability):
    def estimate(atom):
        interval = finite_size_correct(atom.count_bounds(10), 10)
        return GlobalEstimate(probability, 'stub', interval, 0.0, 0.0, 0.0, ['stub warning'])
    return estimate


def test_verdict_tree_combines_atoms(decay):
    props = parse_property(DECAY_PROPERTIES + "global Both = Pr >= 0.5 (frac(Dec, 1) >= 1/2) "
                                              "& !Pr >= 0.9 (frac(A, 1) >= 1/2);")
    checker = GlobalFormulaChecker(decay, estimator=stub_estimator(0.7))
    tree = checker.check(props.get('Both'))
    assert tree.type == 'and' and tree.verdict
    first, second = tree.children
    assert first.path == 'root.and[0]' and first.verdict
    assert second.type == 'not' and second.verdict
    assert second.children[0].path == 'root.and[1].not'
    assert not second.children[0].verdict
    assert checker.stats['atoms'] == 2
    assert tree.all_warnings() == ['stub warning', 'stub warning']


def test_estimator_failures_name_the_atom(decay, decay_properties):
    def failing(atom):
        raise StiffnessError(0.5, 1e-20)

    with pytest.raises(GlobalCheckError) as info:
        GlobalFormulaChecker(decay, estimator=failing).check(decay_properties.main())
    assert 'root' in str(info.value)
    assert isinstance(info.value.__cause__, StiffnessError)
