"""Shared fixtures: small float64 scenes and configs."""

import numpy as np
import pytest
import torch

from src.models import SceneFile, TrainConfig
from src.services.scenegen import make_synthetic_scene


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_scene() -> SceneFile:
    """Five ring cameras at 16x16 around eight Gaussians."""
    return make_synthetic_scene(n_gaussians=8, n_views=5, size=16, seed=3)


@pytest.fixture
def train_config() -> TrainConfig:
    return TrainConfig(iterations=4, dtype="float64", log_every=1)
