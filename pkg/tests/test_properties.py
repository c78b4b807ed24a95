"""
Tests for automata, clock constraints, signals and the property language
"""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import (DslSyntaxError, ModelValidationError, UnknownActionError,
                        UnknownPropertyError, UsageError)
from src.properties.clocks import clock_atom, conjunction, disjunction, interval_constraint
from src.properties.dta import TimedPath, dta_accepts
from src.properties.parser import parse_property
from src.properties.signals import BooleanSignal, signal_combine, structural_resolution
from tests.conftest import DECAY_PROPERTIES


def test_epidemic_properties_parse(epidemic_properties):
    props = epidemic_properties
    assert set(props.dtas) == {'D1', 'D2', 'Twice'}
    assert props.dtas['D1'].states == ('q0', 'q2', 'q1')
    assert props.dtas['D1'].finals == frozenset({'q2'})
    assert props.dtas['Twice'].constants() == {Fraction(1), Fraction(2), Fraction(4)}
    late = props.formulas['LateInfection']
    assert late.op == 'prob' and late.horizon == 300 and late.dta.name == 'D2'


def test_main_property_is_last_check(epidemic_properties):
    g1 = epidemic_properties.main()
    assert g1 is epidemic_properties.globals['G1']
    assert g1.count_bounds(100) == (Fraction(50), Fraction(100))
    assert g1.comparator == '>=' and g1.bound == pytest.approx(0.8)


def test_state_threshold_references_formula(epidemic_properties):
    late = epidemic_properties.globals['Late']
    assert late.op == 'state'
    assert late.formula.name == 'LateInfection'
    assert late.time == 0


@pytest.mark.parametrize('time, horizon, accepted', [
    (5.0, None, False),
    (12.0, None, True),
    (12.0, 10.0, False),
])
def test_late_infection_acceptance(epidemic_properties, time, horizon, accepted):
    d2 = epidemic_properties.dtas['D2']
    path = TimedPath('S', jumps=((time, 'inf', 'I'),))
    assert dta_accepts(d2, path, horizon) is accepted


def test_unmatched_actions_are_self_loops(epidemic_properties, epidemic):
    d2 = epidemic_properties.dtas['D2']
    path = TimedPath('S', jumps=((1.0, 'patch0', 'R'), (2.0, 'loss', 'S'), (11.0, 'inf', 'I')))
    assert dta_accepts(d2, path, alphabet=epidemic.agent_class.labels)


def test_action_outside_alphabet_is_rejected(epidemic_properties):
    d2 = epidemic_properties.dtas['D2']
    path = TimedPath('S', jumps=((1.0, 'ext', 'I'),))
    with pytest.raises(UnknownActionError):
        dta_accepts(d2, path)


def test_path_times_must_not_decrease():
    with pytest.raises(ValueError):
        TimedPath('S', jumps=((2.0, 'a', 'I'), (1.0, 'b', 'S')))


def test_overlapping_edges_are_reported_as_syntax_errors():
    with pytest.raises(DslSyntaxError):
        parse_property("dta Bad { init q0; final qf; edge q0 -> qf on a; edge q0 -> q1 on a; }")


def test_final_locations_are_absorbing():
    with pytest.raises(DslSyntaxError):
        parse_property("dta Bad { init q0; final qf; edge qf -> q0 on a; }")


def test_unknown_proposition():
    with pytest.raises(DslSyntaxError):
        parse_property("dta Bad { init q0; final qf; edge q0 -> qf on a when p; }")


def test_csl_validation_against_states(decay, decay_properties):
    decay_properties.formulas['QuickA'].validate(decay.states)
    other = parse_property("dta E { init q0; final qf; edge q0 -> qf on decay; }\n"
                           "csl Bad = P[<=1] > 0.1 (E) & Z;")
    with pytest.raises(ModelValidationError):
        other.formulas['Bad'].validate(decay.states)


def test_clock_atoms_and_negation():
    below = clock_atom('<', 3)
    assert below.holds(2.9) and not below.holds(3)
    assert (~below).holds(3) and not (~below).holds(2)
    window = interval_constraint(1, 2)
    assert window.holds(1) and window.holds(Fraction(3, 2)) and not window.holds(2)
    assert interval_constraint(0, None).is_trivial
    assert conjunction(below, clock_atom('>', 1)).constants() == {Fraction(1), Fraction(3)}
    assert disjunction(below, ~below).holds(7)
    with pytest.raises(ValueError):
        clock_atom('<', -1)


def test_signal_combination():
    a = BooleanSignal(True, (2.0,), 0.0, 10.0)
    b = BooleanSignal(False, (1.0, 3.0), 0.0, 10.0)
    both = signal_combine('and', [a, b])
    assert both.initial is False and both.switches == (1.0, 2.0)
    either = signal_combine('or', [a, b])
    assert either.initial is True and either.switches == (3.0,)
    negated = signal_combine('not', [a])
    assert negated.initial is False and negated.switches == (2.0,)
    assert either.true_measure() == pytest.approx(3.0)


def test_signal_shift():
    a = BooleanSignal(True, (2.0,), 0.0, 10.0)
    shifted = a.shift(1.5)
    assert shifted.initial is True
    assert shifted.switches == (0.5,)
    assert shifted.end == pytest.approx(8.5)
    assert a.shift(3.0).is_constant and not a.shift(3.0).initial


def test_signals_need_a_common_horizon():
    with pytest.raises(ValueError):
        signal_combine('and', [BooleanSignal.constant(True, 0.0, 1.0),
                               BooleanSignal.constant(True, 0.0, 2.0)])


def test_structural_resolution(decay_properties):
    reach = decay_properties.dtas['Reach']
    signals = {'p': {'A': BooleanSignal(True, (5.0,), 0.0, 10.0),
                     'B': BooleanSignal.constant(False, 0.0, 10.0)}}
    resolved = structural_resolution(reach, signals, horizon=10.0)
    assert resolved.props == ()
    assert len(resolved.edges) == 1
    edge = resolved.edges[0]
    assert str(edge.constraint) == 'x < 5'
    assert edge.formula.holds_in_state('A', {})
    assert not edge.formula.holds_in_state('B', {})


def test_syntax_error_position():
    with pytest.raises(DslSyntaxError) as info:
        parse_property("dta D { init q0 final qf; }")
    assert (info.value.line, info.value.column) == (1, 17)
    with pytest.raises(DslSyntaxError) as info:
        parse_property("dta D {\n  init q0;\n  final qf;\n  edge q0 -> qf on a if x <;\n}")
    assert info.value.line == 4


def test_two_sided_clock_constraint(epidemic_properties):
    window = epidemic_properties.dtas['Twice'].edges[1].constraint
    assert window.holds(1) and window.holds(Fraction(3, 2)) and window.holds(2)
    assert not window.holds(Fraction(1, 2)) and not window.holds(3)


def test_fractional_threshold_interval(decay_properties):
    half = decay_properties.globals['Half']
    assert (half.lower, half.upper) == (Fraction(3, 5), Fraction(2, 3))
    assert half.counts is False


def test_count_threshold_is_unbounded_above():
    props = parse_property(DECAY_PROPERTIES
                           + "global Many = Pr > 0.5 (count(Dec, 1) >= 3);")
    many = props.globals['Many']
    assert many.counts and many.lower == 3 and many.upper is None


def test_operator_chains_are_flat():
    props = parse_property("csl C = A | B | !Z;\ncsl D = (A | B) & Z;")
    assert props.formulas['C'].op == 'or' and len(props.formulas['C'].children) == 3
    assert props.formulas['C'].children[2].op == 'not'
    assert [child.op for child in props.formulas['D'].children] == ['or', 'atom']


def test_automaton_arguments(decay_properties):
    quick_a = decay_properties.formulas['QuickA']
    assert quick_a.dta.name == 'Reach'
    assert [arg.states for arg in quick_a.children] == [frozenset({'A'})]


@pytest.mark.parametrize('text', [
    "dta D { final qf; edge q0 -> qf on a; }",
    "label L = A;\nlabel L = B;",
    "check Missing;",
    "dta D { init q0; final qf; edge q0 -> qf on a; }\ncsl C = D;",
    "csl C = P[<=1] > 0.5 (Nope);",
    "global G = Pr >= 0.5 (frac(A, 1) > 1/2);",
    "global G = Pr >= 0.5 (frac(A, 1) >= 1/0);",
    "global G = Unknown;",
])
def test_invalid_property_sources(text):
    with pytest.raises(DslSyntaxError):
        parse_property(text)


def test_unknown_property_lookup(decay_properties):
    with pytest.raises(UnknownPropertyError):
        decay_properties.get('Nope')
    with pytest.raises(UsageError):
        parse_property("label L = A;").main()


RESOLVABLE = """
dta Varying {
    init q0; final qf;
    props p;
    edge q0 -> q1 on inf when p;
    edge q0 -> qf on ext when !p;
    edge q1 -> qf on patch1 when p & phi_I;
}
"""

EPIDEMIC_LABELS = ('ext', 'loss', 'patch0', 'patch1', 'inf')


def timed_paths(horizon, labels=EPIDEMIC_LABELS):
    jump = st.tuples(st.floats(min_value=0.0, max_value=horizon), st.sampled_from(labels),
                     st.sampled_from(('S', 'I', 'R')))
    return st.tuples(st.sampled_from(('S', 'I', 'R')), st.lists(jump, max_size=8)).map(
        lambda p: TimedPath(p[0], tuple(sorted(p[1], key=lambda j: j[0]))))


@pytest.mark.parametrize('name', ['D1', 'D2', 'Twice'])
def test_sampled_configurations_enable_at_most_one_edge(epidemic_properties, epidemic, name):
    d = epidemic_properties.dtas[name]
    rng = np.random.default_rng(17)
    constants = sorted(float(c) for c in d.constants()) or [0.0]
    for _ in range(10_000):
        q = d.states[rng.integers(len(d.states))]
        action = EPIDEMIC_LABELS[rng.integers(len(EPIDEMIC_LABELS))]
        state = epidemic.states[rng.integers(len(epidemic.states))]
        x = constants[rng.integers(len(constants))] if rng.random() < 0.5 \
            else float(rng.uniform(0.0, 2 * constants[-1] + 1))
        enabled = [e for e in d.outgoing(q, action)
                   if e.constraint.holds(x) and e.formula.holds_in_state(state, {})]
        assert len(enabled) <= 1, (q, action, state, x)


@settings(max_examples=60, deadline=None)
@given(path=timed_paths(20.0), position=st.integers(min_value=0, max_value=8),
       action=st.sampled_from(('ext', 'loss', 'patch0')))
@pytest.mark.parametrize('name', ['D1', 'D2', 'Twice'])
def test_zero_duration_self_loops_do_not_change_acceptance(epidemic_properties, name, path,
                                                           position, action):
    d = epidemic_properties.dtas[name]
    position = min(position, len(path.jumps))
    time, _, state = path.jumps[position - 1] if position else (0.0, None, path.initial_state)
    stay = TimedPath(path.initial_state,
                     path.jumps[:position] + ((time, action, state),) + path.jumps[position:])
    assert dta_accepts(d, stay, alphabet=EPIDEMIC_LABELS) == \
        dta_accepts(d, path, alphabet=EPIDEMIC_LABELS)


@settings(max_examples=100, deadline=None)
@given(timed_paths(10.0, labels=('ext', 'inf', 'patch1')))
def test_structural_resolution_matches_the_labelling(path):
    varying = parse_property(RESOLVABLE).dtas['Varying']
    signals = {'p': {'S': BooleanSignal(True, (3.0, 6.0), 0.0, 10.0),
                     'I': BooleanSignal(False, (2.0,), 0.0, 10.0),
                     'R': BooleanSignal.constant(True, 0.0, 10.0)}}
    resolved = structural_resolution(varying, signals, horizon=10.0)
    assert resolved.props == ()

    def labelling(prop, state, x):
        return signals[prop][state].right_value(x)

    assert dta_accepts(resolved, path, alphabet=EPIDEMIC_LABELS) == \
        dta_accepts(varying, path, labelling=labelling, alphabet=EPIDEMIC_LABELS)
