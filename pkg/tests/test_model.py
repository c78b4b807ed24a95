"""
Tests for the model language, population models and their drift
"""
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from src.errors import DensityDependenceError, DslSyntaxError, ModelValidationError
from src.model.dynamics import diffusion, drift, enabled_transitions, jacobian
from src.model.parser import parse_model
from tests.conftest import PROJECT_ROOT


def simplex_points(dimension):
    weights = st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=dimension,
                       max_size=dimension)
    return weights.map(lambda w: np.array(w) / sum(w))


def test_epidemic_structure(epidemic):
    assert epidemic.name == 'epidemic'
    assert epidemic.states == ('S', 'I', 'R')
    assert epidemic.N == 100
    assert [t.name for t in epidemic.transitions] == ['ext', 'loss', 'patch0', 'patch1', 'inf']
    assert epidemic.initial_state == (100, 0, 0)


def test_synchronized_infection_moves_one_agent(epidemic):
    row = epidemic.update_matrix[[t.name for t in epidemic.transitions].index('inf')]
    assert row.tolist() == [-1, 1, 0]
    assert set(epidemic.agent_class.sources_of('inf')) == {'S', 'I'}


def test_overrides():
    text = (PROJECT_ROOT / 'models' / 'epidemic.pop').read_text()
    model = parse_model(text, n=20, params={'k_inf': 2.5})
    assert model.N == 20
    assert model.initial_state == (20, 0, 0)
    assert model.params['k_inf'] == 2.5


def test_unknown_override_is_ignored():
    model = parse_model("state A B; param k = 1; population N = 4; "
                        "trans t : A->B @ k*X_A;", params={'nope': 3.0})
    assert 'nope' not in model.params


def test_default_initial_state_fills_first_state():
    model = parse_model("state A B; param k = 1; population N = 7; trans t : A->B @ k*X_A;")
    assert model.initial_state == (7, 0)


def test_undeclared_state_is_a_syntax_error():
    with pytest.raises(DslSyntaxError) as info:
        parse_model("state A B;\npopulation N = 5;\ntrans t : A->C @ X_A;")
    assert info.value.line == 3


def test_undefined_parameter_is_a_syntax_error():
    with pytest.raises(DslSyntaxError):
        parse_model("state A B; population N = 5; trans t : A->B @ q*X_A;")


def test_initial_counts_must_sum_to_population():
    with pytest.raises(ModelValidationError):
        parse_model("state A B; population N = 5; trans t : A->B @ X_A; init A = 3;")


def test_labels_default_to_transition_name(decay):
    assert decay.agent_class.labels == ('decay',)


def test_explicit_labels():
    model = parse_model("state A B; population N = 2; trans t : A -go-> B @ X_A;")
    assert model.agent_class.labels == ('go',)


def test_guard_disables_pair_transition():
    model = parse_model("state A B; param k = 1; population N = 4; "
                        "trans pair : 2*A->B @ k*X_A; init A = N;")
    a, b = model.variable_index['A'], model.variable_index['B']
    x = np.zeros(2)
    x[a], x[b] = 1, 3
    assert model.compiled.exact_rates(x)[0] == 0.0
    x[a], x[b] = 3, 1
    assert model.compiled.exact_rates(x)[0] == pytest.approx(3.0)
    assert model.update_matrix[0].tolist() == [-2, 2]


def test_enabled_transitions_report_updates(decay):
    entries = enabled_transitions(decay, decay.initial_vector)
    assert len(entries) == 1
    transition, rate, update = entries[0]
    assert transition.name == 'decay'
    assert rate == pytest.approx(10.0)
    assert update.tolist() == [-1, 1]


@settings(max_examples=30, deadline=None)
@given(simplex_points(3))
def test_drift_conserves_mass(epidemic, xhat):
    assert drift(epidemic, xhat).sum() == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(simplex_points(3))
def test_diffusion_is_symmetric_positive_semidefinite(epidemic, xhat):
    g = diffusion(epidemic, xhat)
    np.testing.assert_allclose(g, g.T)
    assert np.linalg.eigvalsh(g).min() >= -1e-12


def test_jacobian_matches_finite_differences(epidemic):
    xhat = np.array([0.6, 0.3, 0.1])
    np.testing.assert_allclose(jacobian(epidemic, xhat),
                               epidemic.compiled.finite_difference_jacobian(xhat), atol=1e-6)


def test_density_dependence_is_checked():
    model = parse_model("state A B; param k = 1; population N = 10; "
                        "trans t : A->B, B->B @ k*X_A*X_B; init A = 5, B = 5;")
    with pytest.raises(DensityDependenceError) as info:
        drift(model, np.array([0.5, 0.5]))
    assert info.value.transition == 't'


def test_with_initial_state_revalidates(decay):
    moved = decay.with_initial_state([4, 6])
    assert moved.initial_vector.tolist() == [4.0, 6.0]
    with pytest.raises(ModelValidationError):
        decay.with_initial_state([4, 4])


def test_syntax_error_reports_line_and_column():
    with pytest.raises(DslSyntaxError) as info:
        parse_model("state A B;\npopulation N = 5;\ntrans t : A->B @ k*;")
    assert (info.value.line, info.value.column) == (3, 20)


def test_unexpected_character():
    with pytest.raises(DslSyntaxError) as info:
        parse_model("state A B $;")
    assert (info.value.line, info.value.column) == (1, 11)


def test_unterminated_statement():
    with pytest.raises(DslSyntaxError, match='end of input'):
        parse_model("state A B; population N = 5")


def test_comments_and_rate_text():
    model = parse_model("# two states\nstate A B; population N = 4;  # size\n"
                        "trans t : A->B @ (1/N) * X_A;\n")
    rate = model.transitions[0].rate
    assert rate.text == '(1/N) * X_A'
    assert rate.expr == sympy.Symbol('X_A', nonnegative=True) / sympy.Symbol('N', positive=True)


def test_integer_exponents_only():
    model = parse_model("state A B; population N = 4; trans t : A->B @ X_A^2/N;")
    x_a = sympy.Symbol('X_A', nonnegative=True)
    assert model.transitions[0].rate.expr == x_a ** 2 / sympy.Symbol('N', positive=True)
    with pytest.raises(DslSyntaxError, match='integer'):
        parse_model("state A B; population N = 4; trans t : A->B @ X_A^1.5;")


def test_rate_constants_are_exact():
    model = parse_model("state A B; population N = 4; trans t : A->B @ 0.1*X_A;")
    assert model.transitions[0].rate.expr.coeff(sympy.Symbol('X_A', nonnegative=True)) \
        == sympy.Rational(1, 10)


@pytest.mark.parametrize('text', [
    "state A B; population N = 4; local A->B;",
    "state A B; population N = 4; trans t : 0*A->B @ X_A;",
    "state A B; population N = 4; trans t : A->B @ X_A; trans t : B->A @ X_B;",
    "state A N; population N = 4;",
    "state A B; population M = 4;",
])
def test_invalid_statements(text):
    with pytest.raises(DslSyntaxError):
        parse_model(text)


def test_local_transitions_extend_the_agent_class():
    model = parse_model("state A B; population N = 4; local B -reset-> A; "
                        "trans t : A->B @ X_A;")
    assert set(model.agent_class.labels) == {'t', 'reset'}


@pytest.fixture(scope='module')
def reordered_epidemic():
    text = (PROJECT_ROOT / 'models' / 'epidemic.pop').read_text()
    assert 'state S I R;' in text
    return parse_model(text.replace('state S I R;', 'state R S I;'))


@settings(max_examples=30, deadline=None)
@given(simplex_points(3))
def test_drift_and_diffusion_follow_state_order(epidemic, reordered_epidemic, xhat):
    order = [epidemic.states.index(s) for s in reordered_epidemic.states]
    assert reordered_epidemic.states == ('R', 'S', 'I')
    np.testing.assert_allclose(drift(reordered_epidemic, xhat[order]),
                               drift(epidemic, xhat)[order], atol=1e-12)
    np.testing.assert_allclose(diffusion(reordered_epidemic, xhat[order]),
                               diffusion(epidemic, xhat)[np.ix_(order, order)], atol=1e-12)
