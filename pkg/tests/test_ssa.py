"""
Tests for the stochastic simulator, the SSA estimators and exact transient analysis
"""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from src.checking.oracle import SampledEstimator
from src.errors import StateSpaceLimitError
from src.model.parser import parse_model
from src.synchronize.product import synchronize
from src.ssa.estimators import (estimate_global_path_prob, estimate_local_path_prob,
                                estimate_path_prob, proportion_estimate,
                                simulate_state_counts, wilson_interval)
from src.ssa.gillespie import chained_run, gillespie_run, replication_rng
from src.ssa.transient import (exact_global_path_prob, exact_state_count_prob,
                               generator_matrix, reachable_states, transient)

P_LEFT = math.exp(-1)

SMALL_EPIDEMIC = ("state S I R; param k = 2, r = 1; population N = 12; "
                  "trans inf : S->I, I->I @ (1/N)*k*X_S*X_I; trans rec : I->R @ r*X_I; "
                  "init S = 10, I = 2;")


def pooled_chisquare(counts, pmf):
    """Chi-squared p-value of integer samples against a pmf over 0..len(pmf)-1."""
    runs = len(counts)
    observed = np.bincount(counts, minlength=len(pmf))
    # pool both tails so every expected cell has at least five draws
    keep = np.flatnonzero(pmf * runs >= 5)
    lo, hi = keep.min(), keep.max()
    expected = np.concatenate([[pmf[:lo + 1].sum()], pmf[lo + 1:hi], [pmf[hi:].sum()]]) * runs
    observed = np.concatenate([[observed[:lo + 1].sum()], observed[lo + 1:hi],
                               [observed[hi:].sum()]])
    expected *= observed.sum() / expected.sum()
    return stats.chisquare(observed, expected).pvalue


@given(st.integers(min_value=1, max_value=500).flatmap(
    lambda runs: st.tuples(st.integers(min_value=0, max_value=runs), st.just(runs))))
def test_wilson_interval_brackets_the_estimate(sample):
    successes, runs = sample
    lower, upper = wilson_interval(successes, runs, 0.95)
    assert 0.0 <= lower <= successes / runs <= upper <= 1.0


def test_wilson_interval_values():
    lower, upper = wilson_interval(50, 100, 0.95)
    assert lower == pytest.approx(1 - upper)
    assert lower == pytest.approx(0.4038, abs=1e-3)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)
    estimate = proportion_estimate(0, 20, seed=3)
    assert estimate.lower == 0.0 and estimate.upper > 0.0
    assert estimate.to_dict()['seed'] == 3


def test_runs_are_reproducible(epidemic):
    model = epidemic.with_params(k_ext=0.5)
    first = gillespie_run(model, 5.0, seed=7, index=3)
    again = gillespie_run(model, 5.0, seed=7, index=3)
    other = gillespie_run(model, 5.0, seed=7, index=4)
    np.testing.assert_array_equal(first.times, again.times)
    np.testing.assert_array_equal(first.states, again.states)
    assert len(first.times) != len(other.times) or not np.array_equal(first.times, other.times)


def test_trajectory_conserves_agents(epidemic):
    trajectory = gillespie_run(epidemic, 20.0, seed=1)
    assert (trajectory.states.sum(axis=1) == epidemic.N).all()
    assert np.all(np.diff(trajectory.times) > 0)
    frame = trajectory.to_frame()
    assert list(frame.columns) == ['t', 'S', 'I', 'R', 'fired']
    assert frame['t'].iloc[0] == 0.0
    assert trajectory.state_at(0.0).tolist() == list(epidemic.initial_vector)


def test_absorbed_population_stops(decay):
    trajectory = gillespie_run(decay, 1000.0, seed=2)
    assert trajectory.final_state.tolist() == [0.0, 10.0]
    assert len(trajectory.times) == decay.N


def test_flip_flop_transient(flip_flop):
    t = 0.7
    marginal = transient(flip_flop, t).marginal('A')
    assert marginal[1.0] == pytest.approx(0.5 * (1 + math.exp(-2 * t)), abs=1e-9)


def test_transient_at_time_zero(decay):
    dist = transient(decay, 0.0)
    assert dist.probability(lambda x: x[0] == decay.N) == pytest.approx(1.0)
    assert dist.mean().tolist() == [10.0, 0.0]


def test_generator_rows_sum_to_zero():
    model = parse_model("state S I R; param k = 1; population N = 5; "
                        "trans inf : S->I, I->I @ (1/N)*k*X_S*X_I; trans rec : I->R @ X_I; "
                        "init S = 4, I = 1;")
    index = reachable_states(model, [tuple(int(v) for v in model.initial_vector)])
    q = generator_matrix(model, index)
    np.testing.assert_allclose(np.asarray(q.sum(axis=1)).ravel(), 0.0, atol=1e-12)


def test_state_space_cap(decay):
    with pytest.raises(StateSpaceLimitError) as info:
        reachable_states(decay, [(10, 0)], cap=5)
    assert info.value.cap == 5


def test_exact_count_distribution_is_binomial(decay, decay_properties):
    probability = exact_global_path_prob(decay, decay_properties.dtas['Dec'],
                                         (Fraction(6), Fraction(20, 3)), 1)
    assert probability == pytest.approx(stats.binom(10, 1 - P_LEFT).pmf(6), abs=1e-8)
    remaining = exact_state_count_prob(decay, ['A'], (Fraction(2), Fraction(4)), 1.0)
    expected = stats.binom(10, P_LEFT).cdf(4) - stats.binom(10, P_LEFT).cdf(1)
    assert remaining == pytest.approx(expected, abs=1e-8)


def test_sampled_estimators_agree_with_binomial(decay, decay_properties):
    atom = decay_properties.main()
    expected = stats.binom(10, 1 - P_LEFT).pmf(6)
    exact = SampledEstimator(decay, 'exact')(atom)
    assert exact.method == 'exact'
    assert exact.probability == pytest.approx(expected, abs=1e-8)
    assert exact.mean == pytest.approx(10 * (1 - P_LEFT), rel=1e-6)
    simulated = SampledEstimator(decay, 'ssa', runs=2000, seed=11, quiet=True)(atom)
    assert simulated.probability == pytest.approx(expected, abs=0.05)
    interval = simulated.diagnostics['confidence_interval']
    assert interval['lower'] <= simulated.probability <= interval['upper']


def test_sampled_estimator_for_state_threshold(decay, decay_properties):
    atom = decay_properties.globals['Remaining']
    result = SampledEstimator(decay, 'exact')(atom)
    assert result.diagnostics['satisfying_states'] == ['A']
    assert result.probability == pytest.approx(1 - stats.binom(10, P_LEFT).cdf(1), abs=1e-8)


def test_sampled_estimator_rejects_approximations(decay):
    with pytest.raises(ValueError):
        SampledEstimator(decay, 'cla')


def test_local_path_probability_by_simulation(decay, decay_properties):
    dec = decay_properties.dtas['Dec']
    estimate = estimate_local_path_prob(decay, dec, 'A', 2.0, runs=1000, seed=5, quiet=True)
    assert estimate.estimate == pytest.approx(1 - math.exp(-2), abs=0.05)
    tagged = estimate_path_prob(decay, dec, 2.0, s0='A', runs=1000, seed=5, tagging='product',
                                quiet=True)
    assert tagged.estimate == pytest.approx(1 - math.exp(-2), abs=0.05)
    with pytest.raises(ValueError):
        estimate_path_prob(decay, dec, 2.0, runs=10)


def test_global_path_probability_over_horizons(decay, decay_properties):
    estimates = estimate_global_path_prob(decay, decay_properties.dtas['Dec'],
                                          (Fraction(0), Fraction(10)), 1.0, runs=200, seed=3,
                                          horizons=[0.5, 1.0], quiet=True)
    assert set(estimates) == {0.5, 1.0}
    assert estimates[1.0].estimate == 1.0


@pytest.mark.slow
def test_simulated_counts_follow_binomial(decay):
    counts = simulate_state_counts(decay, ['A'], 1.0, 3000, seed=1, quiet=True).astype(int)
    pmf = stats.binom(decay.N, P_LEFT).pmf(np.arange(decay.N + 1))
    assert pooled_chisquare(counts, pmf) > 1e-3


@pytest.mark.slow
def test_absorption_times_match_independent_lifetimes(decay):
    # each agent leaves A after an Exp(k) lifetime; absorption is the largest of N lifetimes
    runs = 2000
    simulated = np.array([gillespie_run(decay, 50.0, seed=9, index=i).times[-1]
                          for i in range(runs)])
    reference = np.random.default_rng(10).exponential(size=(runs, decay.N)).max(axis=1)
    assert stats.ks_2samp(simulated, reference).pvalue > 1e-3


@pytest.mark.slow
def test_simulated_epidemic_matches_exact_transient():
    model = parse_model(SMALL_EPIDEMIC)
    marginal = transient(model, 1.5).marginal('I')
    pmf = np.zeros(model.N + 1)
    pmf[marginal.index.to_numpy().astype(int)] = marginal.to_numpy()
    counts = simulate_state_counts(model, ['I'], 1.5, 4000, seed=21, quiet=True).astype(int)
    assert pooled_chisquare(counts, pmf) > 1e-3


@pytest.mark.slow
def test_product_simulation_aggregates_to_the_base_model(epidemic, epidemic_properties):
    T, runs = 4.0, 1000
    pm = synchronize(epidemic, epidemic_properties.dtas['Twice'], T)
    times = [float(t) for t in pm.times]
    product = np.array([pm.aggregate(chained_run(pm.regions, times, replication_rng(31, i))[0])
                        for i in range(runs)])
    base = np.array([gillespie_run(epidemic, T, seed=32, index=i).final_state
                     for i in range(runs)])
    for column in range(len(epidemic.states)):
        assert stats.ks_2samp(product[:, column], base[:, column]).pvalue > 1e-3
