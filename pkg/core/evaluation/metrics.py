from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from core.dynamics.model import DynamicsModel
from core.envs.base import Environment, GroundTruthStructure, Transition
from core.errors import ParameterError
from core.graphs.adjacency import AdjacencyMatrix
from core.planning.cem import CemParams, CemPlanner, Predictor


def _entries(g) -> np.ndarray:
    return g.entries if isinstance(g, AdjacencyMatrix) else np.asarray(g)


def shd(g1, g2) -> int:
    """Structural Hamming distance: number of differing adjacency entries."""
    a, b = _entries(g1), _entries(g2)
    if a.shape != b.shape:
        raise ParameterError(f"shd needs equal shapes, got {a.shape} and {b.shape}")
    return int(np.sum(a.astype(np.int64) != b.astype(np.int64)))


@dataclass
class EvalDataset:
    """
    Transitions for prediction metrics. `observations` are what the model sees
    (noisy for OOD data); `states` and `next_states` are the true values.
    """

    observations: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    contexts: List[str]
    noisy: List[Tuple[int, ...]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)


def build_dataset(env: Environment, samples: int, rng: np.random.Generator, noisy_count: int = 0) -> EvalDataset:
    """
    Random-action transitions from `env`. With noisy_count > 0 each sample gets its
    own random noisy set among the non-root variables and a perturbed observation.
    """
    obs, states, actions, nexts, ctxs, noisy = [], [], [], [], [], []
    candidates = env.noisy_candidates()
    if noisy_count > len(candidates):
        raise ParameterError(f"at most {len(candidates)} noisy variables available, asked for {noisy_count}")
    env.reset(rng)
    for _ in range(samples):
        s = env.state.copy()  # type: ignore[union-attr]
        a = env.sample_action(rng)
        result = env.step(a)
        chosen = tuple(sorted(int(i) for i in rng.choice(candidates, size=noisy_count, replace=False))) if noisy_count else ()
        obs.append(env.make_ood(s, chosen, env.ood_sigma, rng) if chosen else s.copy())
        states.append(s)
        actions.append(env.action_vector(a))
        nexts.append(result.state)
        ctxs.append(result.context)
        noisy.append(chosen)
        if result.done:
            env.reset(rng)
    return EvalDataset(np.stack(obs), np.stack(states), np.stack(actions), np.stack(nexts), ctxs, noisy)


def _clean_masks(data: EvalDataset, n_state: int, noisy, clean) -> np.ndarray:
    mask = np.ones((len(data), n_state), dtype=bool)
    if noisy is not None or clean is not None:
        noisy_set = set(noisy or ())
        clean_set = set(clean) if clean is not None else set(range(n_state)) - noisy_set
        if noisy_set & clean_set:
            raise ParameterError("noisy and clean sets must be disjoint")
        mask[:] = False
        mask[:, sorted(clean_set)] = True
    elif data.noisy:
        for row, chosen in enumerate(data.noisy):
            mask[row, list(chosen)] = False
    return mask


def prediction_accuracy(
    model: Predictor,
    data: EvalDataset,
    noisy: Sequence[int] | None = None,
    clean: Sequence[int] | None = None,
) -> float:
    """
    Fraction of clean categorical next-state predictions (head argmax) that match
    the truth. Without explicit sets, each row's clean set is the complement of its
    recorded noisy set (the root included).
    """
    layout = model.layout
    cat = [j for j, v in enumerate(layout.state) if v.is_categorical]
    if not cat:
        raise ParameterError("prediction_accuracy needs categorical variables")
    mask = _clean_masks(data, layout.n_state, noisy, clean)
    pred = model.predict_next(data.observations, data.actions)
    hits, total = 0, 0
    for j in cat:
        sl = layout.state_slice(j)
        ok = np.argmax(pred[:, sl], axis=1) == np.argmax(data.next_states[:, sl], axis=1)
        hits += int(ok[mask[:, j]].sum())
        total += int(mask[:, j].sum())
    return hits / total if total else float("nan")


def prediction_mae(model: Predictor, data: EvalDataset, noisy: Sequence[int] | None = None) -> float:
    """Mean absolute error over continuous variables not in the noisy set."""
    layout = model.layout
    mask = _clean_masks(data, layout.n_state, noisy, None)
    pred = model.predict_next(data.observations, data.actions)
    errors = []
    for j, v in enumerate(layout.state):
        if v.is_categorical:
            continue
        sl = layout.state_slice(j)
        err = np.abs(pred[:, sl] - data.next_states[:, sl]).mean(axis=1)
        errors.append(err[mask[:, j]])
    if not errors:
        raise ParameterError("prediction_mae needs continuous variables")
    flat = np.concatenate(errors)
    return float(flat.mean()) if flat.size else float("nan")


def codebook_context_histogram(
    model: DynamicsModel, data: EvalDataset, contexts: Sequence[str]
) -> np.ndarray:
    """K×len(contexts) counts of the eval-mode code index per ground-truth context."""
    if len(data.contexts) != len(data):
        raise ParameterError("histogram needs a context label per sample")
    z, _ = model.assign(data.observations, data.actions)
    col = {name: i for i, name in enumerate(contexts)}
    hist = np.zeros((model.k, len(contexts)), dtype=np.int64)
    np.add.at(hist, (z, [col[c] for c in data.contexts]), 1)
    return hist


def shd_by_context(
    model: DynamicsModel, data: EvalDataset, structure: GroundTruthStructure
) -> Tuple[float, Dict[str, float]]:
    """Mean SHD of each sample's eval LCG against its context's true LCG: (overall, per context)."""
    _, graphs = model.assign(data.observations, data.actions)
    truth = {name: structure.lcg(name).flat() for name in structure.names}
    dists = np.array([int(np.sum(g != truth[c])) for g, c in zip(graphs, data.contexts)])
    per = {}
    for name in structure.names:
        sel = np.array([c == name for c in data.contexts])
        if sel.any():
            per[name] = float(dists[sel].mean())
    return float(dists.mean()), per


def dominant_code(hist: np.ndarray, context_index: int) -> Tuple[int, float]:
    """(code, share) of the code holding the most samples of one context."""
    col = hist[:, context_index]
    total = col.sum()
    code = int(np.argmax(col))
    return code, float(col[code] / total) if total else 0.0


@dataclass
class EpisodeStats:
    rewards: List[float]
    successes: List[bool]

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.rewards))

    @property
    def std_reward(self) -> float:
        return float(np.std(self.rewards))

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.successes))


def episode_eval(
    model: Predictor,
    env: Environment,
    params: CemParams,
    episodes: int,
    rng: np.random.Generator,
    trace: Callable[[Transition], None] | None = None,
) -> EpisodeStats:
    """
    Run the CEM planner in `env` for whole episodes; per-episode reward is the
    step-reward sum. `trace` receives every executed transition.
    """
    if episodes < 1:
        raise ParameterError("episode_eval needs episodes >= 1")
    planner = CemPlanner(model, env, params, rng)
    rewards, successes = [], []
    for _ in range(episodes):
        obs = env.reset(rng)
        total, success = 0.0, False
        while True:
            action = planner.plan(obs, env.goal)  # type: ignore[arg-type]
            prev = env.state.copy()  # type: ignore[union-attr]
            result = env.step(action)
            if trace is not None:
                trace(Transition(prev, env.action_vector(action), result.state, result.context, result.reward, result.done))
            total += result.reward
            obs = result.observation
            if result.done:
                success = result.success
                break
        rewards.append(total)
        successes.append(success)
    return EpisodeStats(rewards, successes)
