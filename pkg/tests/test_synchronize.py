"""
Tests for relabelling, clock slicing and the product population model
"""
from fractions import Fraction

import numpy as np
import pytest

from src.errors import UnknownActionError
from src.model.parser import parse_model
from src.ode.fluid import chained_solve, cla_moments
from src.properties.dta import DtaEdge, OneGDTA
from src.properties.parser import parse_property
from src.synchronize.product import FINAL_COUNTER, base_rate_totals, synchronize
from src.synchronize.slicing import prepare_property, prune_state_conditions, relabel_unique, \
    slice_by_clock

SIR_TEMPLATE = """
model sir;
state {S} {I} {R};
param k = 2, r = 1;
population N = 20;
trans inf : {S}->{I}, {I}->{I} @ (1/N)*k*X_{S}*X_{I};
trans rec : {I}->{R} @ r*X_{I};
init {S} = 18, {I} = 2;
"""

RECOVERY_TEMPLATE = """
dta Recovery {{
    init q0; final qf;
    edge q0 -> q1 on inf when phi_{I} if x < 1;
    edge q0 -> qf on rec when phi_{I};
    edge q1 -> qf on rec when phi_{I} if x <= 3;
}}
"""


def test_shared_labels_get_source_suffix(epidemic, epidemic_properties):
    agent, relabelled = relabel_unique(epidemic.agent_class, epidemic_properties.dtas['D1'])
    assert {'inf_S', 'inf_I'} <= set(agent.labels)
    assert 'inf' not in agent.labels
    assert {e.action for e in relabelled.edges} == {'inf_S', 'inf_I', 'patch1'}


def test_pruning_keeps_edges_whose_source_satisfies_the_formula(epidemic, epidemic_properties):
    agent, relabelled = relabel_unique(epidemic.agent_class, epidemic_properties.dtas['D1'])
    pruned = prune_state_conditions(agent, relabelled)
    assert sorted(e.action for e in pruned.edges) == ['inf_I', 'patch1']
    assert all(e.formula.is_true for e in pruned.edges)


def test_unknown_action_in_automaton(decay):
    d = OneGDTA('Bad', ('q0', 'qf'), 'q0', frozenset({'qf'}), (DtaEdge('q0', 'nope', 'qf'),))
    with pytest.raises(UnknownActionError):
        relabel_unique(decay.agent_class, d)


@pytest.mark.parametrize('name, T, times', [
    ('Twice', 4, (0, 1, 2, 4)),
    ('D2', 300, (0, 10, 300)),
    ('D1', 300, (0, 300)),
])
def test_slicing_at_clock_constants(epidemic, epidemic_properties, name, T, times):
    _, sliced = prepare_property(epidemic.agent_class, epidemic_properties.dtas[name], T)
    assert sliced.times == tuple(Fraction(t) for t in times)
    assert len(sliced.regions) == len(times) - 1


def test_region_automata_follow_the_clock(epidemic, epidemic_properties):
    _, sliced = prepare_property(epidemic.agent_class, epidemic_properties.dtas['D2'], 300)
    assert sliced.regions[0].step('q0', 'inf_S') == 'qb'
    assert sliced.regions[1].step('q0', 'inf_S') == 'qf'
    assert sliced.regions[1].step('q0', 'ext') == 'q0'
    assert sliced.region_index(Fraction(10)) == 1
    assert sliced.prefix(5).times == (Fraction(0), Fraction(5))


def test_slicing_drops_self_loops(decay):
    d = OneGDTA('Loop', ('q0', 'qf'), 'q0', frozenset({'qf'}),
                (DtaEdge('q0', 'decay', 'q0'),))
    sliced = slice_by_clock(d, 1)
    assert sliced.regions[0].delta == {}


def test_product_conserves_agents(epidemic, epidemic_properties):
    pm = synchronize(epidemic, epidemic_properties.dtas['Twice'], 4)
    n_agents = len(pm.product.states)
    for model in pm.regions:
        updates = model.update_matrix
        assert (updates[:, :n_agents].sum(axis=1) == 0).all()
        assert (updates[:, n_agents] >= 0).all()
    assert pm.regions[-1].counters == (FINAL_COUNTER,)
    x0 = pm.initial_vector
    assert x0[:n_agents].sum() == epidemic.N
    assert x0[-1] == 0
    assert pm.aggregate(x0).tolist() == list(epidemic.initial_vector)


def test_split_rates_sum_to_base_rates(epidemic, epidemic_properties):
    pm = synchronize(epidemic, epidemic_properties.dtas['D1'], 300)
    n_agents = len(pm.product.states)
    counts = np.array([20, 5, 15, 10, 4, 6, 25, 5, 10], dtype=float)
    assert n_agents == len(counts) and counts.sum() == epidemic.N
    x = np.append(counts, 3.0)
    totals = base_rate_totals(pm, 0, x)
    expected = epidemic.compiled.exact_rates(pm.aggregate(x))
    for t, rate in zip(epidemic.transitions, expected):
        assert totals[t.name] == pytest.approx(rate, rel=1e-9)


def test_final_counter_counts_entries_into_final_states(decay, decay_properties):
    pm = synchronize(decay, decay_properties.dtas['Dec'], 1)
    region = pm.regions[0]
    increments = {t.sync_set[0].source: t.counter_updates for t in region.transitions}
    assert increments == {'A_q0': (1,), 'A_qf': (0,)}
    assert pm.final_indices().tolist() == [pm.product.index[('B', 'qf')]]


def test_agents_in_final_locations_keep_moving(epidemic, epidemic_properties):
    pm = synchronize(epidemic, epidemic_properties.dtas['D1'], 300)
    local = pm.product.regions[0].local_transitions
    assert ('I_q2', 'R_q2') in {(lt.source, lt.target) for lt in local}
    assert all(lt.target.endswith('_q2') for lt in local if lt.source.endswith('_q2'))


def test_product_commutes_with_state_renaming():
    names = {'S': 'U', 'I': 'V', 'R': 'W'}
    products = []
    for mapping in ({s: s for s in names}, names):
        model = parse_model(SIR_TEMPLATE.format(**mapping))
        d = parse_property(RECOVERY_TEMPLATE.format(**mapping)).dtas['Recovery']
        products.append(synchronize(model, d, 3))
    plain, renamed = products

    def rename(product_state):
        s, q = product_state.split('_', 1)
        return f"{names[s]}_{q}"

    assert [rename(n) for n in plain.product.names] == list(renamed.product.names)
    assert plain.times == renamed.times
    np.testing.assert_array_equal(plain.initial_vector, renamed.initial_vector)
    x = np.append(np.arange(len(plain.product.states), dtype=float) % 4, 1.0)
    for j, (a, b) in enumerate(zip(plain.product.regions, renamed.product.regions)):
        moves = {(rename(lt.source), rename(lt.target)) for lt in a.local_transitions}
        assert moves == {(lt.source, lt.target) for lt in b.local_transitions}
        np.testing.assert_array_equal(plain.regions[j].update_matrix,
                                      renamed.regions[j].update_matrix)
        assert base_rate_totals(plain, j, x) == pytest.approx(base_rate_totals(renamed, j, x))


def test_final_counter_variance_does_not_exceed_final_states(epidemic, epidemic_properties):
    d1 = epidemic_properties.dtas['D1']
    T = 50.0
    augmented = synchronize(epidemic, d1, 50)
    plain = synchronize(epidemic, d1, 50, final_counter=False)
    times = [float(t) for t in augmented.times]
    _, with_counter = cla_moments(chained_solve(augmented.regions, times, 'cla'), epidemic.N, T)
    _, without = cla_moments(chained_solve(plain.regions, times, 'cla'), epidemic.N, T)
    counter = augmented.regions[0].variable_index[FINAL_COUNTER]
    finals = plain.final_indices()
    in_finals = float(without[np.ix_(finals, finals)].sum())
    assert in_finals > 0
    assert with_counter[counter, counter] <= in_finals * (1 + 1e-4)
    assert with_counter[counter, counter] == pytest.approx(in_finals, rel=1e-3)


def test_product_description(decay, decay_properties):
    pm = synchronize(decay, decay_properties.dtas['Dec'], 1)
    info = pm.to_dict()
    assert set(info) == {'base_model', 'property', 'N', 'states', 'counters', 'finals', 'regions'}
    assert info['states'] == ['A_q0', 'A_qf', 'B_q0', 'B_qf']
    assert info['finals'] == ['A_qf', 'B_qf']
    assert info['counters'] == [FINAL_COUNTER]
