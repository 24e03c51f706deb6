"""Desk-scale training runs. Each takes minutes per seed; run with `pytest -m slow`."""

from pathlib import Path

import numpy as np
import pytest

from core.autodiff.rng import Stream, make_rng
from core.config import load_config, profile_config
from core.envs import make_env
from core.evaluation import build_dataset, codebook_context_histogram, dominant_code, episode_eval, shd, shd_by_context
from core.evaluation.metrics import prediction_accuracy
from core.evaluation.pipeline import ood_dataset
from core.planning import CemParams
from core.workflow import run_training

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
SEEDS = [0, 1, 2, 3, 4]


def _mini_chemical(**changes):
    cfg = load_config(CONFIG_DIR / "chemical_mini_fork.yaml")
    return cfg.with_updates(**{"evaluation.every_episodes": 10_000, "evaluation.test_episodes": 1, **changes})


def _train(cfg, seed, tmp_path):
    return run_training(cfg, seed, tmp_path / f"{cfg.method}-{cfg.model.codebook_size}-{seed}")["trainer"].model


def test_single_code_recovers_global_graph(tmp_path):
    cfg = _mini_chemical(**{"model.codebook_size": 1})
    hits = 0
    for seed in SEEDS:
        model = _train(cfg, seed, tmp_path)
        env = make_env(cfg, seed)
        hits += shd(model.code_graph(0), env.structure.global_graph) <= 1
    assert hits >= 4


def test_dominant_fork_code_learns_fork_graph(tmp_path):
    cfg = _mini_chemical()
    hits = 0
    for seed in SEEDS:
        model = _train(cfg, seed, tmp_path)
        env = make_env(cfg, seed)
        data = build_dataset(env, 1000, make_rng(seed, Stream.EVAL, 99))
        hist = codebook_context_histogram(model, data, env.structure.names)
        code, share = dominant_code(hist, env.structure.names.index("fork"))
        hits += share >= 0.5 and shd(model.code_graph(code), env.structure.lcg("fork")) <= 1
    assert hits >= 4


def test_fine_grained_model_beats_dense_out_of_distribution(tmp_path):
    gaps = []
    for seed in SEEDS:
        scores = {}
        for method in ("fcdl", "dense"):
            cfg = _mini_chemical(method=method)
            model = _train(cfg, seed, tmp_path)
            data = ood_dataset(cfg, seed, 1000, 2, make_rng(seed, Stream.EVAL, 98))
            scores[method] = prediction_accuracy(model, data)
        gaps.append(scores["fcdl"] - scores["dense"])
    assert np.mean(gaps) >= 0.10


def test_magnetic_codes_cut_redundant_edges(tmp_path):
    base = profile_config(
        "magnetic2d",
        "mini",
        model={"feature_dim": 64, "hidden_dim": 64, "hidden_layers": 2, "encoder_hidden": [64]},
        training={"total_steps": 30_000},
        evaluation={"every_episodes": 10_000, "test_episodes": 1, "noisy_counts": [0]},
    )
    env = make_env(base)
    redundant = env.structure.redundant_edges("non-magnetic")
    wins = 0
    for seed in SEEDS:
        per_k = {}
        for k in (1, 16):
            cfg = base.with_updates(**{"model.codebook_size": k})
            model = _train(cfg, seed, tmp_path)
            data = build_dataset(make_env(cfg, seed), 1000, make_rng(seed, Stream.EVAL, 97))
            per_k[k] = shd_by_context(model, data, env.structure)[1]["non-magnetic"]
        assert per_k[1] == pytest.approx(redundant, abs=0.5)
        wins += per_k[16] <= 0.5 * per_k[1]
    assert wins >= 4


def test_planner_with_true_dynamics_solves_chemical():
    cfg = profile_config("chemical-full-fork", "mini")
    env = make_env(cfg, 0)
    stats = episode_eval(env.oracle_dynamics(), env, CemParams.from_config(cfg, env), 100, make_rng(0, Stream.PLANNER))
    assert stats.success_rate >= 0.95
