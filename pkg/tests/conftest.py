import numpy as np
import pytest

from gazex.dataset import build_samples, split_by_participant
from gazex.features import GazeMode
from gazex.synthgen import generate_dataset

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_trials():
    """Ten synthetic participants; enough for splits and short training runs."""
    return generate_dataset(10, seed=11)


@pytest.fixture(scope="session")
def small_splits(small_trials):
    parts = split_by_participant(small_trials, seed=0)
    return [build_samples(p, GazeMode.EYE_VISLET) for p in parts]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
