"""
Integration tests for 'corrclass.py check'.

Grey-box style:
- Setup: write or pick a scenario file
- Test: run the check command
- Assert: exit status and the JSON or text report
"""
import json

from tests.conftest import SCENARIOS


DEMO = SCENARIOS / 'demo.ccs'


def test_check_demo_passes(cli_runner):
    """Every directive of the demo scenario holds"""
    result = cli_runner.run(['check', str(DEMO)])

    assert result.returncode == 0, result.stderr
    report = json.loads(result.stdout)
    assert report['schema'] == 1
    assert report['seed'] == 1
    assert report['summary']['directives'] == 19
    assert report['summary']['failures'] == 0
    assert report['summary']['cases'] == sum(entry['cases'] for entry in report['directives'])
    assert 'seconds' not in report


def test_check_report_names_and_order(cli_runner):
    report = cli_runner.check(DEMO)

    names = [entry['name'] for entry in report['directives']]
    assert names[0] == 'check hrr max-n 2'
    assert names[1] == 'check specializations count 5 max-dim 3'
    assert 'check functoriality G0 a b' in names
    assert 'check functoriality G0 a b #2' in names
    assert names[-1] == 'eval ab functor HChern'


def test_check_eval_entry(cli_runner):
    report = cli_runner.check(DEMO)

    entry = report['directives'][-1]
    assert entry['suite'] == 'eval'
    assert entry['informational'] is True
    assert entry['value']['matrix'] == {'()': {'()': '6'}}


def test_check_is_deterministic(cli_runner):
    first = cli_runner.run(['check', str(DEMO), '--seed', '42'])
    second = cli_runner.run(['check', str(DEMO), '--seed', '42'])

    assert first.stdout == second.stdout
    assert json.loads(first.stdout)['seed'] == 42


def test_check_jobs_do_not_change_report(cli_runner):
    serial = cli_runner.run(['check', str(DEMO)])
    parallel = cli_runner.run(['check', str(DEMO), '--jobs', '4'])

    assert serial.stdout == parallel.stdout


def test_check_timing_adds_seconds(cli_runner):
    report = cli_runner.check(DEMO, '--timing')

    assert report['seconds'] >= 0
    assert all('seconds' in entry for entry in report['directives'])


def test_check_suites_filter(cli_runner):
    report = cli_runner.check(DEMO, '--suites', 'ktheory')

    assert [entry['name'] for entry in report['directives']] == ['check hrr max-n 2', 'check grr i']

    report = cli_runner.check(DEMO, '--suites', 'eval,decomposition')
    assert [entry['name'] for entry in report['directives']] == ['check decomposition c', 'eval ab functor HChern']


def test_check_text_format(cli_runner):
    result = cli_runner.run(['check', str(DEMO), '--format', 'text'])

    assert result.returncode == 0
    lines = result.stdout.strip().split('\n')
    assert lines[0].startswith('PASS check hrr max-n 2 (')
    assert 'EVAL eval ab functor HChern' in lines
    assert lines[-1].endswith('0 failures')


def test_check_negative_control_twist(cli_runner):
    """Dropping the twist yields exactly one failure"""
    result = cli_runner.run(['check', str(SCENARIOS / 'no_twist.ccs')])

    assert result.returncode == 1
    report = json.loads(result.stdout)
    assert report['summary']['failures'] == 1
    (entry,) = report['directives']
    assert entry['name'] == 'check naturality td_bfm a without twist'
    assert entry['failures'][0]['witness'] == '()'


def test_check_negative_control_koszul(cli_runner):
    report = cli_runner.check(SCENARIOS / 'no_koszul.ccs')

    by_name = {entry['name']: entry for entry in report['directives']}
    assert by_name['check hrr max-n 2 without koszul']['failures']
    assert by_name['check grr i without koszul']['failures']
    assert by_name['check grr i']['failures'] == []


def test_check_precondition_failure_is_reported(cli_runner):
    """A directive whose arguments do not fit fails without stopping the run"""
    path = cli_runner.scenario('bad.ccs', '''
morphism i : P(1) -> P(2) { t1 <- s1 };
check base-change i i;
check grr i;
''')
    result = cli_runner.run(['check', str(path)])

    assert result.returncode == 1
    report = json.loads(result.stdout)
    first, second = report['directives']
    assert 'smooth' in first['failures'][0]['error']
    assert second['failures'] == []


def test_check_empty_scenario(cli_runner):
    path = cli_runner.scenario('empty.ccs', '# nothing here\n')
    report = cli_runner.check(path)

    assert report['directives'] == []
    assert report['summary'] == {'cases': 0, 'directives': 0, 'failures': 0}


def test_check_unknown_name_is_a_parse_error(cli_runner):
    path = cli_runner.scenario('unknown.ccs', 'space X = P(1);\ncorr a : X <- X -> q { left [s1], right [s1] };\n')
    result = cli_runner.run(['check', str(path)])

    assert result.returncode == 2
    assert result.stdout == ''
    assert result.stderr.startswith('Error: ')
    assert "2:20: Unknown name 'q'" in result.stderr


def test_check_syntax_error_position(cli_runner):
    path = cli_runner.scenario('syntax.ccs', 'space X = Q(1);\n')
    result = cli_runner.run(['check', str(path)])

    assert result.returncode == 2
    assert "1:12: Expected ';', found '('" in result.stderr


def test_check_unexpected_character(cli_runner):
    path = cli_runner.scenario('lexical.ccs', 'space X = P(1) $;\n')
    result = cli_runner.run(['check', str(path)])

    assert result.returncode == 2
    assert "1:16: Unexpected character '$'" in result.stderr


def test_check_wrong_argument_kind(cli_runner):
    path = cli_runner.scenario('kinds.ccs', 'space X = P(1);\ncheck grr X;\n')
    result = cli_runner.run(['check', str(path)])

    assert result.returncode == 2
    assert "'X' is a space, expected a morphism" in result.stderr


def test_check_missing_file(cli_runner, tmp_path):
    result = cli_runner.run(['check', str(tmp_path / 'missing.ccs')])

    assert result.returncode == 2
    assert 'Error:' in result.stderr


def test_check_verbose_logs_to_stderr(cli_runner):
    quiet = cli_runner.run(['check', str(SCENARIOS / 'no_twist.ccs')])
    verbose = cli_runner.run(['check', str(SCENARIOS / 'no_twist.ccs'), '--verbose'])

    assert quiet.stderr == ''
    assert 'corrclass:INFO:' in verbose.stderr
    assert quiet.stdout == verbose.stdout
