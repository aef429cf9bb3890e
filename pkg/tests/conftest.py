import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles.py importable

from qkr.config import PipelineConfig  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def fast_cfg():
    """Small-budget pipeline settings for functional tests."""
    return PipelineConfig(vae_epochs=20, forest_n_trees=10, boost_rounds=30, repetitions=2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
