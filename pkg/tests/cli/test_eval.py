"""
Integration tests for 'corrclass.py eval'.
"""
import json

from tests.conftest import SCENARIOS


DEMO = SCENARIOS / 'demo.ccs'


def test_eval_corr_matrix(cli_runner):
    result = cli_runner.run(['eval', str(DEMO), '--expr', 'ab', '--functor', 'HChern'])

    assert result.returncode == 0, result.stderr
    value = json.loads(result.stdout)
    assert value['kind'] == 'corr'
    assert value['value'] == 'P() <- P(1,2) -> P() { left [], right [] }'
    assert value['functor'] == 'HChern'
    assert value['matrix'] == {'()': {'()': '6'}}


def test_eval_zigzag_matches_composite(cli_runner):
    result = cli_runner.run(['eval', str(DEMO), '--expr', 'z', '--functor', 'HChern'])

    value = json.loads(result.stdout)
    assert value['length'] == 2
    assert value['matrix'] == {'()': {'()': '6'}}


def test_eval_space(cli_runner):
    value = json.loads(cli_runner.run(['eval', str(DEMO), '--expr', 'X']).stdout)

    assert value == {
        'kind': 'space',
        'value': 'P(1,1)',
        'dimension': 2,
        'euler': 4,
        'todd': '1 + 1 * h2 + 1 * h1 + 1 * h1*h2',
    }


def test_eval_morphism_and_bicycle(cli_runner):
    morphism = json.loads(cli_runner.run(['eval', str(DEMO), '--expr', 'pi']).stdout)
    assert morphism['value'] == 'P(1,1) -> P(2) { t1 <- s1 }'
    assert morphism['smooth'] is False
    assert morphism['relative_dimension'] == 0

    bicycle = json.loads(cli_runner.run(['eval', str(DEMO), '--expr', 'd']).stdout)
    assert bicycle['grade'] == [4, 4]


def test_eval_text_format(cli_runner):
    result = cli_runner.run(['eval', str(DEMO), '--expr', 'phi', '--format', 'text'])

    assert result.returncode == 0
    assert 'kind: cf' in result.stdout.split('\n')
    assert 'value: -1*ind(L(0)) + 2*ind(L(1))' in result.stdout


def test_eval_unknown_name(cli_runner):
    result = cli_runner.run(['eval', str(DEMO), '--expr', 'nothing'])

    assert result.returncode == 2
    assert "Unknown name 'nothing'" in result.stderr


def test_eval_functor_on_space_is_an_error(cli_runner):
    result = cli_runner.run(['eval', str(DEMO), '--expr', 'X', '--functor', 'G0'])

    assert result.returncode == 2
    assert result.stderr.startswith('Error: ')


def test_eval_unsupported_functor(cli_runner):
    result = cli_runner.run(['eval', str(DEMO), '--expr', 'y', '--functor', 'HChern'])

    assert result.returncode == 2
    assert 'pro_lci zigzags do not carry the functor HChern' in result.stderr
