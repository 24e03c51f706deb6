import pytest

from core.autodiff.rng import make_rng
from core.config import profile_config
from core.envs import make_env

SMALL_MODEL = {
    "codebook_size": 4,
    "code_dim": 4,
    "feature_dim": 8,
    "hidden_dim": 16,
    "hidden_layers": 1,
    "encoder_hidden": [16],
    "decoder_hidden": 8,
}


@pytest.fixture
def small_cfg():
    """Mini Chemical fork with a tiny network, cheap enough for unit tests."""
    return profile_config(
        "chemical-full-fork",
        "mini",
        model=SMALL_MODEL,
        training={"batch_size": 16, "init_steps": 50, "total_steps": 80, "lr": 1e-3},
        planner={"candidates": 8, "elites": 4, "iterations": 2},
        evaluation={"every_episodes": 1, "test_episodes": 1, "accuracy_samples": 40, "noisy_counts": [0, 2]},
    )


@pytest.fixture
def magnetic_cfg():
    return profile_config(
        "magnetic2d",
        "mini",
        model=SMALL_MODEL,
        training={"batch_size": 16, "init_steps": 50, "total_steps": 80},
        planner={"candidates": 8, "elites": 4, "iterations": 2},
        evaluation={"test_episodes": 1, "accuracy_samples": 40, "noisy_counts": [0]},
    )


@pytest.fixture
def chem_env(small_cfg):
    return make_env(small_cfg, seed=0)


@pytest.fixture
def rng():
    return make_rng(123)

