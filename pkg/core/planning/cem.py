from __future__ import annotations

from dataclasses import dataclass
from typing import Any, List, Protocol, Sequence

import numpy as np

from core.config import ExperimentConfig
from core.dynamics.layout import FactoredLayout
from core.envs.base import ActionSpace, Environment
from core.errors import ParameterError


class Predictor(Protocol):
    """Anything with a deterministic batched next-state prediction (learned model or true dynamics)."""

    layout: FactoredLayout

    def predict_next(self, states, actions) -> np.ndarray: ...


@dataclass(frozen=True)
class CemParams:
    horizon: int
    candidates: int
    elites: int
    iterations: int
    action_space: ActionSpace
    laplace: float = 0.1
    init_std: float = 0.05

    def __post_init__(self) -> None:
        if self.horizon < 1 or self.iterations < 1:
            raise ParameterError("CEM needs horizon >= 1 and iterations >= 1")
        if not 1 <= self.elites <= self.candidates:
            raise ParameterError("CEM needs 1 <= elites <= candidates")

    @classmethod
    def from_config(cls, cfg: ExperimentConfig, env: Environment) -> "CemParams":
        p = cfg.planner
        return cls(cfg.horizon(), p.candidates, p.elites, p.iterations, env.action_space, p.laplace, p.init_std)


def _vectors(env: Environment, seqs: np.ndarray) -> np.ndarray:
    """Candidates×horizon native actions -> candidates×horizon×action_dim model inputs."""
    if env.action_space.kind == "categorical":
        return np.eye(env.action_space.size)[seqs]
    return seqs


def score_batch(model: Predictor, env: Environment, state: np.ndarray, vectors: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Summed reward of deterministic model rollouts, one per row of `vectors` (C×H×A)."""
    count, horizon = vectors.shape[:2]
    s = np.tile(np.asarray(state, dtype=np.float64), (count, 1))
    total = np.zeros(count)
    for t in range(horizon):
        s = model.predict_next(s, vectors[:, t])
        total += env.rewards(s, goal)
    return total


def rollout_score(model: Predictor, env: Environment, state: np.ndarray, actions: Sequence[Any], goal: np.ndarray) -> float:
    """Σ_t reward(ŝ_t, goal) along one action sequence; the empty sequence scores 0."""
    s = np.asarray(state, dtype=np.float64)
    score = 0.0
    for a in actions:
        s = model.predict_next(s[None, :], env.action_vector(a)[None, :])[0]
        score += env.reward(s, goal)
    return score


class CemPlanner:
    """Cross-entropy method over action sequences, keeping the best candidate seen so far."""

    def __init__(self, model: Predictor, env: Environment, params: CemParams, rng: np.random.Generator):
        self.model = model
        self.env = env
        self.params = params
        self.rng = rng
        self.last_best_scores: List[float] = []

    def _sample(self, dist) -> np.ndarray:
        p, space = self.params, self.params.action_space
        if space.kind == "categorical":
            probs = dist
            cols = [self.rng.choice(space.size, size=p.candidates, p=probs[t]) for t in range(p.horizon)]
            return np.stack(cols, axis=1)
        mu, std = dist
        draws = mu[None] + std[None] * self.rng.standard_normal((p.candidates, p.horizon, space.size))
        return np.clip(draws, space.low, space.high)

    def _refit(self, elites: np.ndarray):
        p, space = self.params, self.params.action_space
        if space.kind == "categorical":
            counts = np.stack([np.bincount(elites[:, t], minlength=space.size) for t in range(p.horizon)])
            counts = counts + p.laplace
            return counts / counts.sum(axis=1, keepdims=True)
        return elites.mean(axis=0), np.maximum(elites.std(axis=0), 1e-6)

    def _initial(self):
        p, space = self.params, self.params.action_space
        if space.kind == "categorical":
            return np.full((p.horizon, space.size), 1.0 / space.size)
        return np.zeros((p.horizon, space.size)), np.full((p.horizon, space.size), p.init_std)

    def plan(self, state: np.ndarray, goal: np.ndarray) -> Any:
        """First action of the best sequence found."""
        p = self.params
        dist = self._initial()
        best_score, best_seq = -np.inf, None
        self.last_best_scores = []
        for _ in range(p.iterations):
            seqs = self._sample(dist)
            scores = score_batch(self.model, self.env, state, _vectors(self.env, seqs), goal)
            order = np.argsort(-scores, kind="stable")
            if scores[order[0]] > best_score:
                best_score, best_seq = float(scores[order[0]]), seqs[order[0]].copy()
            self.last_best_scores.append(best_score)
            dist = self._refit(seqs[order[: p.elites]])
        first = best_seq[0]  # type: ignore[index]
        return int(first) if p.action_space.kind == "categorical" else np.asarray(first, dtype=np.float64)


def plan(model: Predictor, env: Environment, state: np.ndarray, goal: np.ndarray, params: CemParams, rng: np.random.Generator) -> Any:
    return CemPlanner(model, env, params, rng).plan(state, goal)
