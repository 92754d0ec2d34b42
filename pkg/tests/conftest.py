import os
import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
PRESETS = REPO_ROOT / "presets"


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


def preset(name):
    return PRESETS / name


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo test")
