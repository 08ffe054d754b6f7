"""
Integration tests for 'corrclass.py fmt'.
"""
from tests.conftest import SCENARIOS


def test_fmt_matches_golden(cli_runner):
    result = cli_runner.run(['fmt', str(SCENARIOS / 'demo.ccs')])

    assert result.returncode == 0, result.stderr
    assert result.stdout == (SCENARIOS / 'demo.golden').read_text(encoding='utf-8')


def test_fmt_is_idempotent(cli_runner):
    result = cli_runner.run(['fmt', str(SCENARIOS / 'demo.golden')])

    assert result.stdout == (SCENARIOS / 'demo.golden').read_text(encoding='utf-8')


def test_fmt_keeps_options_in_canonical_order(cli_runner):
    path = cli_runner.scenario('options.ccs', '''
corr a : P() <- P(1) -> P() { left [], right [] };
check functoriality G0 a a without twist max-n 2 count 5 max-dim 3;
''')
    result = cli_runner.run(['fmt', str(path)])

    assert result.stdout.split('\n')[1] == 'check functoriality G0 a a count 5 max-dim 3 max-n 2 without twist;'


def test_fmt_rejects_redefinition(cli_runner):
    path = cli_runner.scenario('twice.ccs', 'space X = P(1);\nspace X = P(2);\n')
    result = cli_runner.run(['fmt', str(path)])

    assert result.returncode == 2
    assert "2:1: 'X' is already defined" in result.stderr


def test_fmt_reports_declaration_errors_with_position(cli_runner):
    path = cli_runner.scenario('legs.ccs', 'morphism f : P(2) -> P(1) { t1 <- s1 };\n')
    result = cli_runner.run(['fmt', str(path)])

    assert result.returncode == 2
    assert "1:1: morphism 'f': Cannot embed P2 into P1" in result.stderr
