from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from core.dynamics.layout import FactoredLayout, VariableSpec
from core.envs.base import ActionSpace, ContextSpec, Environment, GroundTruthStructure
from core.errors import ParameterError
from core.graphs.adjacency import AdjacencyMatrix

RED, BLACK = 0, 1

# State variable indices (adjacency rows/cols); the action is row 7.
BALL_COLOR, BOX_COLOR, BALL_X, BALL_Y, BOX_X, BOX_Y, EEF = range(7)
ACTION = 7


@dataclass(frozen=True)
class MagneticConfig:
    table_length: float = 0.6  # x extent
    table_width: float = 0.9  # y extent
    attraction_step: float = 0.05
    max_move: float = 0.05
    goal_height: float = 0.8
    eef_height: Tuple[float, float] = (0.8, 1.0)
    success_radius: float = 0.05
    episode_length: int = 25


def magnetic_graphs() -> Tuple[AdjacencyMatrix, AdjacencyMatrix]:
    """(global CG, non-magnetic LCG). The magnetic context uses the global CG."""
    base = [
        (BALL_COLOR, BALL_COLOR),
        (BOX_COLOR, BOX_COLOR),
        (BALL_X, BALL_X),
        (BALL_Y, BALL_Y),
        (BOX_X, BOX_X),
        (BOX_Y, BOX_Y),
        (EEF, EEF),
        (ACTION, EEF),
    ]
    attraction = [
        (BOX_X, BALL_X), (BALL_COLOR, BALL_X), (BOX_COLOR, BALL_X),
        (BOX_Y, BALL_Y), (BALL_COLOR, BALL_Y), (BOX_COLOR, BALL_Y),
    ]
    return AdjacencyMatrix.from_edges(7, 1, base + attraction), AdjacencyMatrix.from_edges(7, 1, base)


class Magnetic2DEnv(Environment):
    """
    Planar kinematic stand-in for a magnetic pick task.

    The ball moves one attraction step per axis toward the box iff both objects
    are red. The end-effector moves by the action, clamped per dimension. The
    goal is to bring the end-effector to (ball_x, ball_y, goal_height).
    """

    def __init__(self, cfg: MagneticConfig = MagneticConfig(), downstream: bool = False, ood_sigma: float = 100.0):
        super().__init__()
        if ood_sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {ood_sigma}")
        self.cfg = cfg
        self.downstream = downstream
        self.ood_sigma = ood_sigma
        self.episode_length = cfg.episode_length
        self.layout = FactoredLayout(
            state=(
                VariableSpec("ball_color", "categorical", 2),
                VariableSpec("box_color", "categorical", 2),
                VariableSpec("ball_x", "continuous", 1),
                VariableSpec("ball_y", "continuous", 1),
                VariableSpec("box_x", "continuous", 1),
                VariableSpec("box_y", "continuous", 1),
                VariableSpec("eef", "continuous", 3),
            ),
            action=(VariableSpec("move", "continuous", 3),),
        )
        self.action_space = ActionSpace("continuous", 3, -cfg.max_move, cfg.max_move)
        cg, non_magnetic = magnetic_graphs()
        self.structure = GroundTruthStructure(
            global_graph=cg,
            contexts=(
                ContextSpec("magnetic", lambda s, a: self.is_magnetic(s), cg),
                ContextSpec("non-magnetic", lambda s, a: not self.is_magnetic(s), non_magnetic),
            ),
        )

    # --- state access ---------------------------------------------------------

    def _get(self, state: np.ndarray, var: int) -> np.ndarray:
        return np.asarray(state)[self.layout.state_slice(var)]

    def colors(self, state: np.ndarray) -> Tuple[int, int]:
        return int(np.argmax(self._get(state, BALL_COLOR))), int(np.argmax(self._get(state, BOX_COLOR)))

    def is_magnetic(self, state: np.ndarray) -> bool:
        return self.colors(state) == (RED, RED)

    def compose(self, ball_color: int, box_color: int, ball, box, eef) -> np.ndarray:
        return np.concatenate([np.eye(2)[ball_color], np.eye(2)[box_color], ball, box, eef]).astype(np.float64)

    # --- actions --------------------------------------------------------------

    def _check_action(self, action) -> np.ndarray:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape != (3,) or not np.all(np.isfinite(a)):
            raise ParameterError(f"Magnetic2D actions are finite 3-vectors, got {np.asarray(action).shape}")
        return np.clip(a, -self.cfg.max_move, self.cfg.max_move)

    def action_vector(self, action) -> np.ndarray:
        return self._check_action(action)

    def action_from_vector(self, vector: np.ndarray) -> np.ndarray:
        return np.asarray(vector, dtype=np.float64).reshape(-1)

    def sample_action(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.cfg.max_move, self.cfg.max_move, size=3)

    # --- dynamics -------------------------------------------------------------

    def transition(self, state: np.ndarray, action) -> np.ndarray:
        move = self._check_action(action)
        nxt = np.array(state, dtype=np.float64, copy=True)
        if self.is_magnetic(state):
            ball = np.array([self._get(state, BALL_X)[0], self._get(state, BALL_Y)[0]])
            box = np.array([self._get(state, BOX_X)[0], self._get(state, BOX_Y)[0]])
            ball = ball + np.clip(box - ball, -self.cfg.attraction_step, self.cfg.attraction_step)
            nxt[self.layout.state_slice(BALL_X)] = ball[0]
            nxt[self.layout.state_slice(BALL_Y)] = ball[1]
        nxt[self.layout.state_slice(EEF)] = self._get(state, EEF) + move
        return nxt

    def initial_state(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        c = self.cfg
        table = np.array([c.table_length, c.table_width])
        ball = rng.uniform(0.0, 1.0, size=2) * table
        box = rng.uniform(0.0, 1.0, size=2) * table
        eef = np.concatenate([rng.uniform(0.0, 1.0, size=2) * table, [rng.uniform(*c.eef_height)]])
        colors = rng.integers(2, size=2)
        state = self.compose(int(colors[0]), int(colors[1]), ball, box, eef)
        if self.downstream:
            state = self.make_ood(state, (BOX_X, BOX_Y), self.ood_sigma, rng)
        self.noisy = ()
        return state, np.array([c.goal_height])

    def noisy_candidates(self) -> List[int]:
        return [BOX_X, BOX_Y]

    # --- reward and perturbation ----------------------------------------------

    def _targets(self, states: np.ndarray, goal: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        bx = states[:, self.layout.state_slice(BALL_X)]
        by = states[:, self.layout.state_slice(BALL_Y)]
        return np.concatenate([bx, by, np.full((len(states), 1), float(np.asarray(goal).reshape(-1)[0]))], axis=1)

    def _eef(self, states: np.ndarray) -> np.ndarray:
        return np.atleast_2d(states)[:, self.layout.state_slice(EEF)]

    def rewards(self, states: np.ndarray, goal: np.ndarray) -> np.ndarray:
        dist = np.abs(self._eef(states) - self._targets(states, goal)).sum(axis=1)
        return 1.0 - np.tanh(5.0 * dist)

    def reward(self, state: np.ndarray, goal: np.ndarray) -> float:
        return float(self.rewards(state, goal)[0])

    def success(self, state: np.ndarray, goal: np.ndarray) -> bool:
        dist = np.linalg.norm(self._eef(state) - self._targets(state, goal), axis=1)[0]
        return bool(dist < self.cfg.success_radius)

    def make_ood(
        self, state: np.ndarray, noisy: Sequence[int], sigma: float, rng: np.random.Generator
    ) -> np.ndarray:
        """
        Box coordinates listed in `noisy` are redrawn from N(0, σ²) (they may leave
        the table) and one object, chosen at random, turns black. Empty `noisy` is
        the identity.
        """
        if sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {sigma}")
        noisy = [int(i) for i in noisy]
        if any(i not in (BOX_X, BOX_Y) for i in noisy):
            raise ParameterError("Magnetic2D perturbs only box coordinates")
        out = np.array(state, dtype=np.float64, copy=True)
        if not noisy:
            return out
        for var in noisy:
            out[self.layout.state_slice(var)] = rng.normal(0.0, sigma)
        victim = BALL_COLOR if rng.random() < 0.5 else BOX_COLOR
        out[self.layout.state_slice(victim)] = np.eye(2)[BLACK]
        return out
