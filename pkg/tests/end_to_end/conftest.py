"""Pytest fixtures for end-to-end runs of the shipped catalog."""

from __future__ import annotations

import pytest

from energyforge.cli.main import main
from energyforge.settings import Settings


def pytest_configure(config: pytest.Config) -> None:
    """Register custom markers."""
    config.addinivalue_line("markers", "end_to_end: full CLI runs over catalog flows")
    config.addinivalue_line("markers", "slow: full-resolution acceptance runs (set ENERGYFORGE_RUN_SLOW=1)")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if Settings().run_slow_tests:
        return
    skip_slow = pytest.mark.skip(reason="set ENERGYFORGE_RUN_SLOW=1 to run full-resolution acceptance tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def run_cli(capsys):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""

    def run(*argv):
        code = main([str(a) for a in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run
