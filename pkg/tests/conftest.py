"""
Shared pytest fixtures for corrclass tests.

Test Philosophy:
- Library tests call corrclass functions on small hand-checked spaces
- CLI tests are grey-box: write a scenario file, run the CLI, assert on output
- Randomized batteries run with small counts and a fixed seed
"""
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

# Add parent directory to path so we can import corrclass
sys.path.insert(0, str(Path(__file__).parent.parent))

import corrclass

# Export fixtures and helpers
__all__ = ['cli_run', 'cli_runner', 'tally', 'point_corr', 'SCENARIOS']

SCENARIOS = Path(__file__).parent / 'scenarios'


def cli_run(args: list, env: dict = None, cwd: str = None) -> subprocess.CompletedProcess:
    """
    Run corrclass.py CLI command.

    Args:
        args: Command arguments (without 'python corrclass.py' prefix)
        env: Environment variables (merged with current env)
        cwd: Working directory

    Returns:
        CompletedProcess with stdout, stderr, returncode

    Example:
        result = cli_run(['fmt', 'demo.ccs'])
        assert result.returncode == 0
    """
    cmd = [sys.executable, str(Path(__file__).parent.parent / 'corrclass.py')] + args

    run_env = os.environ.copy()
    for variable in ('CORRCLASS_SEED', 'CORRCLASS_FORMAT', 'CORRCLASS_MAX_DIM', 'CORRCLASS_CONFIG_PATH'):
        run_env.pop(variable, None)
    if env:
        run_env.update(env)

    return subprocess.run(
        cmd,
        capture_output=True,
        text=True,
        env=run_env,
        cwd=cwd
    )


class CLIRunner:
    """Helper class for running CLI commands with an isolated home directory.

    Directory structure:
        home/
        └── .config/corrclass/config.json    # Optional configuration file
    """

    def __init__(self, home: Path):
        self.home = home
        self.config_path = home / '.config' / 'corrclass' / 'config.json'
        self.env = {
            'HOME': str(home),
        }

    def run(self, args: list, cwd: str = None, env: dict = None) -> subprocess.CompletedProcess:
        """Run CLI command with this runner's home directory."""
        return cli_run(args, env={**self.env, **(env or {})}, cwd=cwd)

    def write_config(self, data) -> Path:
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        self.config_path.write_text(data if isinstance(data, str) else json.dumps(data), encoding='utf-8')
        return self.config_path

    def scenario(self, name: str, text: str) -> Path:
        path = self.home / name
        path.write_text(text, encoding='utf-8')
        return path

    def check(self, path, *args) -> dict:
        """Run check and return the parsed JSON report."""
        result = self.run(['check', str(path), *args])
        if result.returncode not in (0, 1):
            raise RuntimeError(f"check failed: {result.stderr}")
        return json.loads(result.stdout)


@pytest.fixture
def cli_runner(tmp_path):
    """
    Fixture providing a CLIRunner with an isolated HOME.

    Use this for integration tests that call CLI commands.
    """
    home = tmp_path / 'home'
    home.mkdir(parents=True, exist_ok=True)
    return CLIRunner(home)


@pytest.fixture
def tally():
    return corrclass.CheckTally('test', 'test')


@pytest.fixture
def point_corr():
    """Factory for pt <- P(n) -> pt."""
    def make(n: int) -> corrclass.Correspondence:
        apex = corrclass.Space((n,))
        to_point = corrclass.morphism_to_point(apex)
        return corrclass.corr_make(to_point, to_point)
    return make
