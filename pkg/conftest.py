"""Shared pytest fixtures."""

import numpy as np
import pytest

from src.binning_calibration.model import Dataset, SeededRng


@pytest.fixture
def five_points():
    """Five tie-free scores with labels (0, 1, 0, 1, 1)."""
    return Dataset(scores=[0.1, 0.2, 0.3, 0.4, 0.5], labels=[0, 1, 0, 1, 1])


@pytest.fixture
def rng():
    return SeededRng(12345)


@pytest.fixture
def random_dataset():
    def make(n, seed=0):
        generator = np.random.default_rng(seed)
        scores = generator.uniform(0.0, 1.0, n)
        labels = (generator.uniform(0.0, 1.0, n) < scores).astype(int)
        return Dataset(scores=scores, labels=labels)

    return make
