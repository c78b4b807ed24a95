"""
Tests for the maximum-entropy density reconstruction
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from src.errors import MomentFeasibilityError
from src.maxent.density import (MomentConstraints, _Dual, default_support, interval_prob,
                                reconstruct)


def beta_moments(a, b, order):
    moments, value = [], 1.0
    for r in range(order):
        value *= (a + r) / (a + b + r)
        moments.append(value)
    return tuple(moments)


def test_two_moments_on_unit_interval_give_uniform():
    density = reconstruct(MomentConstraints((1 / 2, 1 / 3), (0.0, 1.0)))
    assert interval_prob(density, 0.0, 0.25) == pytest.approx(0.25, abs=1e-4)
    assert density.pdf(0.5) == pytest.approx(1.0, abs=1e-3)
    assert density.interval_prob(-5.0, 5.0) == pytest.approx(1.0, abs=1e-6)


def test_beta_moments_are_matched():
    target = beta_moments(2, 5, 4)
    density = reconstruct(MomentConstraints(target, (0.0, 1.0)))
    np.testing.assert_allclose(density.moments(4), target, rtol=1e-5)
    for cut in (0.1, 0.3, 0.5):
        assert density.interval_prob(0.0, cut) == pytest.approx(stats.beta(2, 5).cdf(cut),
                                                                abs=0.02)


def test_density_vanishes_outside_support():
    density = reconstruct(MomentConstraints((1 / 2, 1 / 3), (0.0, 1.0)))
    assert density.pdf(1.5) == 0.0
    assert density.interval_prob(2.0, 3.0) == 0.0
    frame = density.to_frame(points=11)
    assert list(frame.columns) == ['x', 'density']
    assert len(frame) == 11


def test_mean_outside_support_is_infeasible():
    with pytest.raises(MomentFeasibilityError):
        MomentConstraints((2.0,), (0.0, 1.0))


def test_negative_variance_is_infeasible():
    with pytest.raises(MomentFeasibilityError):
        MomentConstraints((0.5, 0.2), (0.0, 1.0))


def test_empty_support():
    with pytest.raises(ValueError):
        MomentConstraints((1.0,), (1.0, 1.0))


@pytest.mark.parametrize('mean, variance, N, expected', [
    (50.0, 4.0, 100, (30.0, 70.0)),
    (2.0, 4.0, 100, (-0.5, 22.0)),
    (98.0, 4.0, 100, (78.0, 100.5)),
    (5.0, 0.0, 10, (4.5, 5.5)),
])
def test_default_support(mean, variance, N, expected):
    assert default_support(mean, variance, N) == pytest.approx(expected)


def multipliers(order):
    return st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=order,
                    max_size=order).map(np.array)


@settings(max_examples=50, deadline=None)
@given(multipliers(4), multipliers(4), st.floats(min_value=0.0, max_value=1.0))
def test_dual_is_convex(a, b, weight):
    dual = _Dual(MomentConstraints(beta_moments(2, 5, 4), (0.0, 1.0)).standardized(),
                 (-2.0, 3.0), 64)
    mixed = weight * a + (1 - weight) * b
    chord = weight * dual.value(a) + (1 - weight) * dual.value(b)
    assert dual.value(mixed) <= chord + 1e-9 * (1 + abs(chord))
    _, hessian, _ = dual.gradient_hessian(mixed)
    assert np.linalg.eigvalsh(hessian).min() >= -1e-9 * max(1.0, np.abs(hessian).max())


@pytest.mark.parametrize('start', [
    [0.0, 0.0, 0.0],
    [0.4, -0.3, 0.1],
    [-0.5, 1.0, 0.2],
])
def test_reconstruction_does_not_depend_on_the_start(start):
    c = MomentConstraints(beta_moments(3, 2, 3), (0.0, 1.0))
    reference = reconstruct(c)
    density = reconstruct(c, start=start)
    np.testing.assert_allclose(density.lambdas, reference.lambdas, atol=1e-5)
    for cut in (0.2, 0.5, 0.8):
        assert density.interval_prob(0.0, cut) == pytest.approx(reference.interval_prob(0.0, cut),
                                                                 abs=1e-6)


@pytest.mark.parametrize('a, b, order', [(2, 5, 2), (3, 2, 3), (4, 4, 4), (1.5, 3, 4)])
def test_reconstruction_reproduces_its_moments(a, b, order):
    target = beta_moments(a, b, order)
    density = reconstruct(MomentConstraints(target, (0.0, 1.0)))
    np.testing.assert_allclose(density.moments(order), target, rtol=1e-5)
    assert density.interval_prob(0.0, 1.0) == pytest.approx(1.0, abs=1e-6)
