"""
Tests for local path probabilities, threshold signals and CSL-TA checking
"""
import math

import numpy as np
import pytest

from src.checking.individual import (CslTaChecker, PathProbabilityCurve, check_csl_ta,
                                     path_prob_curves, path_prob_fixed, threshold_signal)
from src.checking.schedule import parse_method
from src.properties.dta import DtaEdge, OneGDTA


@pytest.mark.parametrize('method, expected', [
    ('fluid', ('fluid', None)),
    ('moments(3)', ('moments', 3)),
    (' cla ', ('cla', None)),
    ('maxent(4)', ('maxent', 4)),
    ('exact', ('exact', None)),
])
def test_parse_method(method, expected):
    assert parse_method(method) == expected


@pytest.mark.parametrize('method', ['euler', 'moments(x)', 'fluid()', ''])
def test_parse_method_rejects_unknown(method):
    with pytest.raises(ValueError):
        parse_method(method)


@pytest.mark.parametrize('method', ['fluid', 'moments(2)'])
def test_fixed_time_path_probability(decay, decay_properties, method):
    dec = decay_properties.dtas['Dec']
    assert path_prob_fixed('A', 0.0, dec, decay, 2, method) == pytest.approx(1 - math.exp(-2),
                                                                            abs=1e-5)
    assert path_prob_fixed('B', 0.0, dec, decay, 2, method) == pytest.approx(0.0, abs=1e-9)


def test_fixed_time_path_probability_unknown_state(decay, decay_properties):
    with pytest.raises(ValueError):
        path_prob_fixed('C', 0.0, decay_properties.dtas['Dec'], decay, 1)


def test_curves_of_a_constant_rate_agent(decay, decay_properties):
    curves = path_prob_curves(decay_properties.dtas['Dec'], decay, 1.0, 2.0, grid_points=5)
    assert set(curves) == {'A', 'B'}
    np.testing.assert_allclose(curves['A'].values, 1 - math.exp(-1), atol=1e-5)
    np.testing.assert_allclose(curves['B'].values, 0.0, atol=1e-9)
    assert curves['A'](1.3) == pytest.approx(1 - math.exp(-1), abs=1e-5)


def test_curve_algorithms_agree(epidemic, epidemic_properties):
    twice = epidemic_properties.dtas['Twice']
    kolmogorov = path_prob_curves(twice, epidemic, 4, 3.0, grid_points=4)
    products = path_prob_curves(twice, epidemic, 4, 3.0, algorithm='products', grid_points=4)
    np.testing.assert_allclose(kolmogorov['S'].values, products['S'].values, atol=1e-4)
    with pytest.raises(ValueError):
        path_prob_curves(twice, epidemic, 4, 3.0, algorithm='euler', grid_points=4)


@pytest.mark.parametrize('name, T', [('D1', 50), ('D2', 20), ('Twice', 4)])
def test_unreachable_locations_do_not_change_the_probability(epidemic, epidemic_properties,
                                                              name, T):
    d = epidemic_properties.dtas[name]
    target = sorted(d.finals)[0]
    detour = (DtaEdge('qz', 'inf', target, d.edges[0].formula),
              DtaEdge('qz', 'ext', 'qy'),
              DtaEdge('qy', 'patch0', 'qz'))
    padded = OneGDTA(d.name, d.states + ('qy', 'qz'), d.initial, d.finals,
                     d.edges + detour, d.props, d.alphabet)
    for s0 in ('S', 'I'):
        assert path_prob_fixed(s0, 0.0, padded, epidemic, T) == pytest.approx(
            path_prob_fixed(s0, 0.0, d, epidemic, T), abs=1e-5)


def test_threshold_crossing_is_refined():
    curve = PathProbabilityCurve.from_function(lambda t: t / 10, 10.0, points=11)
    signal = threshold_signal(curve, '>=', 0.5)
    assert signal.initial is False
    assert len(signal.switches) == 1
    assert signal.switches[0] == pytest.approx(5.0, abs=1e-6)
    assert signal.boundary[0][1] is True
    assert signal.value(7.0) and not signal.value(2.0)


def test_strict_threshold_excludes_the_crossing():
    curve = PathProbabilityCurve.from_function(lambda t: 1 - t / 10, 10.0, points=11)
    signal = threshold_signal(curve, '>', 0.5)
    assert signal.initial is True
    assert signal.switches[0] == pytest.approx(5.0, abs=1e-6)
    assert signal.boundary[0][1] is False


def test_tangential_zero_is_reported():
    curve = PathProbabilityCurve.from_function(lambda t: 0.50005 + (t - 5) ** 2 / 1000, 10.0,
                                               points=11)
    signal = threshold_signal(curve, '>=', 0.5)
    assert signal.is_constant and signal.initial
    assert any('possible tangential zero' in w for w in signal.warnings)


def test_touch_on_a_grid_point_does_not_switch():
    curve = PathProbabilityCurve.from_function(lambda t: 0.5 - (t - 5) ** 2 / 1000, 10.0,
                                               points=11)
    signal = threshold_signal(curve, '>=', 0.5)
    assert signal.is_constant and signal.initial is False
    assert any('possible tangential zero' in w and 't0=5' in w for w in signal.warnings)


def test_touch_between_grid_points_is_reported_once():
    curve = PathProbabilityCurve.from_function(lambda t: 0.5 - (t - 5.5) ** 2 / 1000, 10.0,
                                               points=11)
    signal = threshold_signal(curve, '>=', 0.5)
    assert signal.is_constant and signal.initial is False
    touches = [w for w in signal.warnings if 'possible tangential zero' in w]
    assert len(touches) == 1 and 't0=5.5' in touches[0]


def test_clear_extremum_is_not_a_touch():
    curve = PathProbabilityCurve.from_function(lambda t: 0.4 - (t - 5) ** 2 / 1000, 10.0,
                                               points=11)
    signal = threshold_signal(curve, '>=', 0.5)
    assert signal.is_constant and not signal.warnings


def test_csl_ta_with_state_argument(decay, decay_properties):
    checker = CslTaChecker(decay, grid_points=11)
    signals = checker.check(decay_properties.formulas['QuickA'], 1.0)
    assert signals['A'].is_constant and signals['A'].initial
    assert signals['B'].is_constant and not signals['B'].initial
    assert checker.stats['probability_nodes'] == 1


def test_csl_ta_boolean_combination(decay, decay_properties):
    from src.properties.logic import csl_not
    signals = check_csl_ta(csl_not(decay_properties.formulas['Quick']), decay, 1.0,
                           grid_points=11)
    assert not signals['A'].initial and signals['B'].initial


def test_local_checking_rejects_collective_methods(decay):
    with pytest.raises(ValueError):
        CslTaChecker(decay, 'cla')
