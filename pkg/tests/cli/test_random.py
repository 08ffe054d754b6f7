"""
Integration tests for 'corrclass.py random' and the scenario generator behind it.
"""
import json

import pytest

import corrclass


def test_random_is_deterministic(cli_runner):
    first = cli_runner.run(['random', '--seed', '7', '--max-dim', '2', '--count', '2'])
    second = cli_runner.run(['random', '--seed', '7', '--max-dim', '2', '--count', '2'])
    other = cli_runner.run(['random', '--seed', '8', '--max-dim', '2', '--count', '2'])

    assert first.returncode == 0, first.stderr
    assert first.stdout == second.stdout
    assert first.stdout != other.stdout


def test_random_output_is_canonical(cli_runner):
    result = cli_runner.run(['random', '--seed', '3', '--max-dim', '2', '--count', '1'])
    path = cli_runner.scenario('random.ccs', result.stdout)

    assert cli_runner.run(['fmt', str(path)]).stdout == result.stdout


@pytest.mark.slow
def test_random_scenario_checks_pass(cli_runner):
    result = cli_runner.run(['random', '--seed', '3', '--max-dim', '2', '--count', '1'])
    path = cli_runner.scenario('random.ccs', result.stdout)
    report = cli_runner.check(path)

    assert report['summary']['failures'] == 0
    assert report['summary']['cases'] > 0


def test_random_zero_dimension_uses_points_only(cli_runner):
    result = cli_runner.run(['random', '--seed', '5', '--max-dim', '0', '--count', '2'])

    assert result.returncode == 0
    assert 'P(1' not in result.stdout
    assert 'P(2' not in result.stdout


def test_random_rejects_negative_dimension(cli_runner):
    result = cli_runner.run(['random', '--max-dim', '-1'])

    assert result.returncode == 2
    assert result.stderr.startswith('Error: ')


def test_random_counts_pairs():
    scenario = corrclass.random_scenario(11, 3, {'pairs': 4, 'bicycles': 0, 'zigzags': 0})
    corrs = [s for s in scenario.statements if s.kind == 'corr']
    assert len(corrs) == 8
    grr = [s for s in scenario.statements if s.kind == 'check' and s.fields['what'] == 'grr']
    assert len(grr) == 4


def test_random_zigzag_kinds_cycle():
    scenario = corrclass.random_scenario(2, 2, {'pairs': 0, 'bicycles': 0, 'zigzags': 3})
    kinds = [s.fields['kind'] for s in scenario.statements if s.kind == 'zigzag']
    assert kinds == ['pro-smooth', 'pro-smooth', 'pro-lci', 'pro-lci', 'smooth-objects', 'smooth-objects']


def test_random_spaces_respect_bound():
    scenario = corrclass.random_scenario(4, 3, {'pairs': 5, 'bicycles': 0, 'zigzags': 0})
    for kind, value in scenario.env.values():
        if kind == 'corr':
            assert corrclass.space_dimension(value.source) <= 3
            assert corrclass.space_dimension(value.target) <= 3


def test_run_suites_report_shape():
    scenario = corrclass.parse_scenario('check corr-suite count 1 max-dim 2;\n')
    report = corrclass.run_suites(scenario, seed=9)
    assert report['schema'] == corrclass.REPORT_SCHEMA
    assert report['seed'] == 9
    (entry,) = report['directives']
    assert entry['name'] == 'check corr-suite count 1 max-dim 2'
    assert entry['suite'] == 'corr'
    json.dumps(report)


def test_run_suites_bicycle_suite_reports_commutativity_as_informational():
    scenario = corrclass.parse_scenario('check bicycle-suite count 1 max-dim 2;\n')
    report = corrclass.run_suites(scenario, seed=1)
    main, observed = report['directives']
    assert main['informational'] is False
    assert observed['informational'] is True
    assert report['summary']['failures'] == len(main['failures'])


def test_emit_report_text_summary():
    report = {'schema': 1, 'seed': 1, 'directives': [], 'summary': {'directives': 0, 'cases': 0, 'failures': 0}}
    assert corrclass.emit_report(report, 'text') == '0 directives, 0 cases, 0 failures'
