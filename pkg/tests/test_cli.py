import json
import sys

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from tests.conftest import PROJECT_ROOT

sys.path.insert(0, str(PROJECT_ROOT / 'scripts'))

import popcheck  # noqa: E402
from src.errors import (DslSyntaxError, GlobalCheckError, MaxEntConvergenceError,  # noqa: E402
                        ModelValidationError, StiffnessError, UnknownPropertyError,
                        UsageError)
from src.runner.config import RunConfig, _parse_over  # noqa: E402
from src.runner.pipeline import (EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE,  # noqa: E402
                                 VerificationPipeline, exit_code_for)


def test_method_colon_form_is_normalized(tmp_path):
    cfg = RunConfig(verb='fluid', model_path=tmp_path / 'm.pop', method='moments:4', horizon=1.0)
    assert cfg.method == 'moments(4)'
    assert cfg.method_name == 'moments'
    assert cfg.manifest()['method'] == 'moments(4)'


@pytest.mark.parametrize('kwargs', [
    {'verb': 'check-global', 'property_path': 'p.prop', 'method': 'fluid'},
    {'verb': 'sweep', 'property_path': 'p.prop', 'method': 'cla'},
    {'verb': 'fluid', 'method': 'fluid'},
    {'verb': 'check-local'},
    {'verb': 'fluid', 'method': 'euler', 'horizon': 1.0},
    {'verb': 'fluid', 'horizon': 1.0, 'colour': 'red'},
])
def test_invalid_configurations(kwargs):
    with pytest.raises(ValidationError):
        RunConfig(model_path='m.pop', **kwargs)


def test_parse_over():
    assert _parse_over('N=10,20') == ('N', [10, 20])
    assert _parse_over(' T = 100, 200.5 ') == ('T', [100.0, 200.5])
    with pytest.raises(ValueError):
        _parse_over('N=2.5')
    with pytest.raises(ValueError):
        _parse_over('K=1')


def test_sweep_values():
    cfg = RunConfig(verb='sweep', model_path='m.pop', property_path='p.prop', over='N=20,50')
    assert cfg.sweep_values() == ('N', [20, 50])


@pytest.mark.parametrize('exc, code', [
    (StiffnessError(0.5, 1e-20), EXIT_NUMERICAL),
    (MaxEntConvergenceError(100, 1.0), EXIT_NUMERICAL),
    (DslSyntaxError('bad token', 1, 2), EXIT_USAGE),
    (GlobalCheckError('root.and[0]', ModelValidationError('no such state')), EXIT_USAGE),
    (GlobalCheckError('root', StiffnessError(0.1, 1e-18)), EXIT_NUMERICAL),
    (UsageError("unknown agent state 'Z'"), EXIT_USAGE),
    (UnknownPropertyError('Nope'), EXIT_USAGE),
    (ValueError('shape mismatch'), EXIT_NUMERICAL),
    (KeyError('X_A'), EXIT_NUMERICAL),
])
def test_exit_code_for(exc, code):
    assert exit_code_for(exc) == code


def test_missing_model_file(tmp_path):
    assert popcheck.main(['fluid', str(tmp_path / 'nope.pop'), '-T', '1', '-q']) == EXIT_USAGE


def test_unknown_verb_is_a_usage_error(decay_files):
    model, _ = decay_files
    with pytest.raises(SystemExit) as info:
        popcheck.main(['bogus', str(model)])
    assert info.value.code == EXIT_USAGE


def test_invalid_option_combination(decay_files, tmp_path):
    model, props = decay_files
    argv = ['check-global', str(model), str(props), '-m', 'fluid', '-o', str(tmp_path), '-q']
    assert popcheck.main(argv) == EXIT_USAGE


def test_unknown_property_name(decay_files, tmp_path):
    model, props = decay_files
    argv = ['check-global', str(model), str(props), '--name', 'Nope', '-o', str(tmp_path), '-q']
    assert popcheck.main(argv) == EXIT_USAGE


def test_unknown_agent_state(decay_files, tmp_path):
    model, props = decay_files
    argv = ['check-local', str(model), str(props), '--name', 'Quick', '-m', 'ssa', '--state', 'Z',
            '--runs', '10', '-o', str(tmp_path), '-q']
    assert popcheck.main(argv) == EXIT_USAGE


def test_local_property_for_global_check(decay_files, tmp_path):
    model, props = decay_files
    argv = ['check-global', str(model), str(props), '--name', 'Quick', '-o', str(tmp_path), '-q']
    assert popcheck.main(argv) == EXIT_USAGE


def test_fluid_end_to_end(decay_files, tmp_path):
    model, _ = decay_files
    csv_path, json_path = tmp_path / 'fluid.csv', tmp_path / 'fluid.json'
    argv = ['fluid', str(model), '-T', '1', '--grid-points', '11', '-o', str(tmp_path),
            '--csv', str(csv_path), '--json', str(json_path), '-q']
    assert popcheck.main(argv) == EXIT_OK

    frame = pd.read_csv(csv_path)
    assert list(frame.columns) == ['t', 'X_A', 'X_B']
    assert len(frame) == 11
    np.testing.assert_allclose(frame['X_A'], 10 * np.exp(-frame['t']), rtol=1e-4)

    document = json.loads(json_path.read_text())
    assert document['config']['verb'] == 'fluid'
    assert document['result']['N'] == 10
    assert document['artifacts']['csv'] == str(csv_path)


def test_cla_adds_variances(decay_files, tmp_path):
    model, _ = decay_files
    csv_path = tmp_path / 'cla.csv'
    argv = ['fluid', str(model), '-m', 'cla', '-T', '1', '--grid-points', '5', '-o', str(tmp_path),
            '--csv', str(csv_path), '-q']
    assert popcheck.main(argv) == EXIT_OK
    frame = pd.read_csv(csv_path)
    p = np.exp(-frame['t'])
    np.testing.assert_allclose(frame['Var_A'], 10 * p * (1 - p), atol=1e-4)


def test_check_global_exact(decay_files, tmp_path):
    # X_Final(1) ~ Bin(10, 1 - e^-1); the only count in [6, 20/3] is 6, with probability ~0.25
    model, props = decay_files
    json_path = tmp_path / 'half.json'
    argv = ['check-global', str(model), str(props), '-m', 'exact', '--no-correction',
            '-o', str(tmp_path), '--json', str(json_path), '-q']
    assert popcheck.main(argv) == EXIT_OK
    result = json.loads(json_path.read_text())['result']
    assert result['verdict'] is False
    assert result['method'] == 'exact'


@pytest.mark.parametrize('argv', [
    ['simulate', '-T', '2', '--seed', '7', '--runs', '200'],
    ['fluid', '-m', 'cla', '-T', '1', '--grid-points', '6'],
])
def test_manifest_reproduces_the_run(decay_files, tmp_path, argv):
    model, props = decay_files
    verb, options = argv[0], argv[1:]
    files = [str(model), str(props)] if verb == 'simulate' else [str(model)]
    first_csv, first_json = tmp_path / 'first.csv', tmp_path / 'first.json'
    assert popcheck.main([verb, *files, *options, '-o', str(tmp_path), '--csv', str(first_csv),
                          '--json', str(first_json), '-q']) == EXIT_OK

    manifest = json.loads(first_json.read_text())['config']
    second_csv, second_json = tmp_path / 'second.csv', tmp_path / 'second.json'
    manifest.update(csv_path=str(second_csv), json_path=str(second_json))
    assert VerificationPipeline(RunConfig(**manifest)).run() == EXIT_OK

    assert second_csv.read_bytes() == first_csv.read_bytes()
    first, second = json.loads(first_json.read_text()), json.loads(second_json.read_text())
    assert second['result'] == first['result']
