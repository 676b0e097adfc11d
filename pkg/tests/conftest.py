from __future__ import annotations

import numpy as np
import pytest

from visionts.testing import random_model, write_random_archive


@pytest.fixture(scope="session")
def tiny_model():
    return random_model(seed=7)


@pytest.fixture(scope="session")
def tiny_archive(tmp_path_factory):
    path = tmp_path_factory.mktemp("weights") / "tiny.tensors"
    write_random_archive(path, seed=7)
    return path


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def smooth_periodic(period: int, num_periods: int, rng: np.random.Generator, drift: float = 0.01):
    """Random low-harmonic periodic series with slight amplitude modulation."""
    phase = np.arange(period)
    profile = np.zeros(period)
    for k in (1, 2, 3):
        profile += rng.normal(0, 1.0 / k) * np.sin(2 * np.pi * k * phase / period + rng.uniform(0, 2 * np.pi))
    profile += rng.uniform(2.0, 4.0)
    x = np.tile(profile, num_periods)
    return x * (1.0 + drift * np.sin(np.arange(x.size) / 37.0))
