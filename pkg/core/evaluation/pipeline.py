from __future__ import annotations

from pathlib import Path
from typing import Callable, List, Sequence

import numpy as np

from core.autodiff.rng import Stream, make_rng
from core.config import ExperimentConfig
from core.dynamics.model import DynamicsModel
from core.envs import make_env
from core.envs.base import Environment, Transition
from core.evaluation.metrics import (
    EvalDataset,
    build_dataset,
    codebook_context_histogram,
    episode_eval,
    prediction_accuracy,
    prediction_mae,
    shd_by_context,
)
from core.evaluation.report import EvalReport
from core.graphs.adjacency import AdjacencyMatrix
from core.logging_utils import get_logger
from core.planning.cem import CemParams

log = get_logger(__name__)


def ood_dataset(cfg: ExperimentConfig, seed: int, samples: int, noisy_count: int, rng: np.random.Generator) -> EvalDataset:
    """
    Downstream data. Chemical: root held at the context colour, noisy one-hots per
    sample. Magnetic2D: the perturbation is part of the real state, so the box
    coordinates are marked noisy on every row.
    """
    env = make_env(cfg, seed, downstream=True)
    if cfg.is_chemical:
        return build_dataset(env, samples, rng, noisy_count=noisy_count)
    data = build_dataset(env, samples, rng)
    data.noisy = [tuple(env.noisy_candidates())] * len(data)
    return data


def evaluate(
    model: DynamicsModel,
    cfg: ExperimentConfig,
    seed: int,
    step: int = 0,
    episode: int = 0,
    noisy_counts: Sequence[int] | None = None,
    episodes: int | None = None,
    episode_noisy: int = 0,
    trace: Callable[[Transition], None] | None = None,
) -> EvalReport:
    """
    All diagnostics for one model snapshot. Pass episodes=0 to skip planner rollouts;
    `trace` receives every transition of the test episodes.
    """
    rng = make_rng(seed, Stream.EVAL, step)
    samples = cfg.evaluation.accuracy_samples
    env = make_env(cfg, seed)
    report = EvalReport(
        seed=seed,
        config_hash=cfg.config_hash(),
        method=cfg.method,
        env=cfg.env,
        codebook_size=cfg.effective_codebook_size(),
        step=step,
        episode=episode,
        redundant_edges={name: env.structure.redundant_edges(name) for name in env.structure.names},
    )

    id_data = build_dataset(env, samples, rng)
    report.shd, report.shd_per_context = shd_by_context(model, id_data, env.structure)
    hist = codebook_context_histogram(model, id_data, env.structure.names)
    report.histogram = {name: hist[:, i].tolist() for i, name in enumerate(env.structure.names)}
    if model.codebook is not None:
        z, _ = model.assign(id_data.observations, id_data.actions)
        report.perplexity = model.codebook.perplexity(z)

    counts = cfg.evaluation.noisy_counts if noisy_counts is None else list(noisy_counts)
    if cfg.is_chemical:
        limit = env.layout.n_state - 1
        for n in counts:
            if n > limit:
                log.warning("skipping accuracy for n=%d: only %d non-root nodes", n, limit)
                continue
            report.accuracy[str(n)] = prediction_accuracy(model, ood_dataset(cfg, seed, samples, n, rng))
    else:
        report.mae["id"] = prediction_mae(model, id_data)
        report.mae["ood"] = prediction_mae(model, ood_dataset(cfg, seed, samples, 2, rng))

    n_episodes = cfg.evaluation.test_episodes if episodes is None else episodes
    if n_episodes:
        test_env = make_test_env(cfg, seed, episode_noisy)
        stats = episode_eval(model, test_env, CemParams.from_config(cfg, test_env), n_episodes, rng, trace)
        report.reward_mean, report.reward_std, report.success_rate = (
            stats.mean_reward,
            stats.std_reward,
            stats.success_rate,
        )
    return report


def make_test_env(cfg: ExperimentConfig, seed: int, n_noisy: int = 0) -> Environment:
    if cfg.is_chemical:
        return make_env(cfg, seed, downstream=True, n_noisy=n_noisy)
    return make_env(cfg, seed, downstream=n_noisy > 0)


def dump_lcgs(model: DynamicsModel, env: Environment, out_dir: str | Path) -> List[Path]:
    """
    Write one graph text file per codebook entry (code_<k>.txt) or the method's
    single graph (graph.txt), plus the true LCG of every context (true_<name>.txt).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    n, m = env.layout.n_state, env.layout.n_action
    if model.codebook is not None:
        for k in range(model.k):
            path = out / f"code_{k}.txt"
            model.code_graph(k).save(path)
            written.append(path)
    elif model.method in ("modular", "oracle-graph", "dense"):
        graph = model.global_graph if model.method == "oracle-graph" else AdjacencyMatrix.full(n, m)
        path = out / "graph.txt"
        graph.save(path)  # type: ignore[union-attr]
        written.append(path)
    for name in env.structure.names:
        path = out / f"true_{name}.txt"
        env.structure.lcg(name).save(path)
        written.append(path)
    return written
