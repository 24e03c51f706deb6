from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Literal, Sequence, Tuple

import numpy as np

from core.autodiff.rng import Stream, make_rng
from core.dynamics.layout import FactoredLayout, VariableSpec
from core.envs.base import ActionSpace, ContextSpec, Environment, GroundTruthStructure
from core.errors import ParameterError
from core.graphs.adjacency import AdjacencyMatrix

LocalGraphKind = Literal["fork", "chain"]


@dataclass(frozen=True)
class ChemicalConfig:
    nodes: int = 10
    colors: int = 5
    local_graph: LocalGraphKind = "fork"
    context_color: int = 0  # red
    seed: int = 0
    episode_length: int = 25
    table_retries: int = 1000

    @property
    def action_count(self) -> int:
        return self.nodes * self.colors


def chemical_graphs(n: int, local: LocalGraphKind) -> Tuple[AdjacencyMatrix, AdjacencyMatrix]:
    """(full, local) adjacency over N colour nodes and one action row."""
    full = [(i, j) for j in range(n) for i in range(j + 1)] + [(n, j) for j in range(n)]
    if local == "fork":
        loc = [(0, j) for j in range(n)] + [(j, j) for j in range(1, n)]
    elif local == "chain":
        loc = [(0, 0)] + [(j - 1, j) for j in range(1, n)] + [(j, j) for j in range(1, n)]
    else:
        raise ParameterError(f"unknown local graph {local!r}")
    loc += [(n, j) for j in range(n)]
    return AdjacencyMatrix.from_edges(n, 1, full), AdjacencyMatrix.from_edges(n, 1, loc)


def _axes_all_matter(table: np.ndarray) -> bool:
    """Witness check: along every axis some pair of settings changes the output."""
    for axis in range(table.ndim):
        if table.shape[axis] > 1 and np.array_equal(table, np.roll(table, 1, axis=axis)):
            return False
    return True


class ChemicalEnv(Environment):
    """
    Colour-matching over N nodes. Node 0 is the root.

    Action k·C + c sets node k to colour c, then every descendant j of k in the
    active graph takes colour f_j(x), where x is the pre-action colouring with
    x_k = c. The active graph is the local one (fork or chain) when the root
    colour equals `context_color`, otherwise the full graph. The CPDs f_j are
    seeded lookup tables keyed by parent colours.
    """

    def __init__(
        self,
        cfg: ChemicalConfig = ChemicalConfig(),
        downstream: bool = False,
        n_noisy: int = 0,
        ood_sigma: float = 100.0,
    ):
        super().__init__()
        if cfg.colors < 3:
            raise ParameterError("Chemical needs at least 3 colours so the root varies outside the context")
        if not 0 <= cfg.context_color < cfg.colors:
            raise ParameterError(f"context colour {cfg.context_color} outside [0, {cfg.colors})")
        if n_noisy < 0 or n_noisy > cfg.nodes - 1:
            raise ParameterError(f"n_noisy must lie in [0, {cfg.nodes - 1}]")
        if n_noisy and not downstream:
            raise ParameterError("noisy nodes are only defined for downstream episodes")
        if ood_sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {ood_sigma}")

        self.cfg = cfg
        self.downstream = downstream
        self.n_noisy = n_noisy
        self.ood_sigma = ood_sigma
        self.episode_length = cfg.episode_length
        n, c = cfg.nodes, cfg.colors

        self.layout = FactoredLayout(
            state=tuple(VariableSpec(f"node{i}", "categorical", c) for i in range(n)),
            action=(VariableSpec("action", "categorical", n * c),),
        )
        self.action_space = ActionSpace("categorical", n * c)

        full, local = chemical_graphs(n, cfg.local_graph)
        ctx = cfg.context_color
        self.structure = GroundTruthStructure(
            global_graph=full,
            contexts=(
                ContextSpec(cfg.local_graph, lambda s, a: self.colors_of(s)[0] == ctx, local),
                ContextSpec("full", lambda s, a: self.colors_of(s)[0] != ctx, full),
            ),
        )
        self.observable: Tuple[int, ...] = tuple(range(n))
        self._build_tables(make_rng(cfg.seed, Stream.ENV, 0))

    # --- CPD tables -----------------------------------------------------------

    def _draw(self, rng: np.random.Generator, shape: Tuple[int, ...], check) -> np.ndarray:
        for _ in range(self.cfg.table_retries):
            table = rng.integers(self.cfg.colors, size=shape, dtype=np.int8)
            if check(table):
                return table
        raise ParameterError(f"no faithful CPD table of shape {shape} after {self.cfg.table_retries} draws")

    def _build_tables(self, rng: np.random.Generator) -> None:
        n, c = self.cfg.nodes, self.cfg.colors
        outside = np.array([k for k in range(c) if k != self.cfg.context_color])
        # Full tables only fire outside the context, so witnesses are checked there.
        self.full_tables: Dict[int, np.ndarray] = {
            j: self._draw(rng, (c,) * j, lambda t: _axes_all_matter(np.take(t, outside, axis=0)))
            for j in range(1, n)
        }
        self.local_tables: Dict[int, np.ndarray] = {
            j: self._draw(rng, (c,), _axes_all_matter) for j in range(1, n)
        }

    def tables(self) -> Dict[str, Dict[int, np.ndarray]]:
        return {"full": self.full_tables, self.cfg.local_graph: self.local_tables}

    # --- encoding -------------------------------------------------------------

    def colors_of(self, state: np.ndarray) -> np.ndarray:
        return np.argmax(np.asarray(state).reshape(self.cfg.nodes, self.cfg.colors), axis=1)

    def encode(self, colors: Sequence[int]) -> np.ndarray:
        out = np.zeros((self.cfg.nodes, self.cfg.colors))
        out[np.arange(self.cfg.nodes), np.asarray(colors, dtype=np.int64)] = 1.0
        return out.reshape(-1)

    def _check_action(self, action) -> int:
        a = int(action)
        if a != action or not 0 <= a < self.cfg.action_count:
            raise ParameterError(f"action index {action} outside [0, {self.cfg.action_count})")
        return a

    def action_vector(self, action) -> np.ndarray:
        out = np.zeros(self.cfg.action_count)
        out[self._check_action(action)] = 1.0
        return out

    def action_from_vector(self, vector: np.ndarray) -> int:
        return int(np.argmax(vector))

    def sample_action(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.cfg.action_count))

    # --- dynamics -------------------------------------------------------------

    def in_context(self, colors: np.ndarray) -> bool:
        return int(colors[0]) == self.cfg.context_color

    def descendants(self, k: int, local: bool) -> List[int]:
        n = self.cfg.nodes
        if local and self.cfg.local_graph == "fork":
            return list(range(1, n)) if k == 0 else []
        return list(range(k + 1, n))

    def _cpd(self, j: int, x: np.ndarray, local: bool) -> int:
        if not local:
            return int(self.full_tables[j][tuple(x[:j])])
        parent = 0 if self.cfg.local_graph == "fork" else j - 1
        return int(self.local_tables[j][x[parent]])

    def transition(self, state: np.ndarray, action) -> np.ndarray:
        k, c = divmod(self._check_action(action), self.cfg.colors)
        colors = self.colors_of(state)
        local = self.in_context(colors)
        x = colors.copy()
        x[k] = c
        nxt = x.copy()
        for j in self.descendants(k, local):
            nxt[j] = self._cpd(j, x, local)
        return self.encode(nxt)

    def initial_state(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        n, c = self.cfg.nodes, self.cfg.colors
        colors = rng.integers(c, size=n)
        goal = rng.integers(c, size=n)
        if self.downstream:
            colors[0] = self.cfg.context_color
            noisy = rng.choice(np.arange(1, n), size=self.n_noisy, replace=False) if self.n_noisy else []
            self.noisy = tuple(sorted(int(i) for i in noisy))
        else:
            self.noisy = ()
        goal[0] = colors[0]
        self.observable = tuple(i for i in range(n) if i not in self.noisy)
        return self.encode(colors), self.encode(goal)

    # --- reward and perturbation ----------------------------------------------

    def _matches(self, states: np.ndarray, goal: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        colors = np.argmax(states.reshape(len(states), self.cfg.nodes, self.cfg.colors), axis=2)
        idx = list(self.observable)
        return colors[:, idx] == self.colors_of(goal)[idx]

    def rewards(self, states: np.ndarray, goal: np.ndarray) -> np.ndarray:
        return self._matches(states, goal).mean(axis=1)

    def reward(self, state: np.ndarray, goal: np.ndarray) -> float:
        return float(self.rewards(state, goal)[0])

    def success(self, state: np.ndarray, goal: np.ndarray) -> bool:
        return bool(self._matches(state, goal).all())

    def make_ood(
        self, state: np.ndarray, noisy: Sequence[int], sigma: float, rng: np.random.Generator
    ) -> np.ndarray:
        """Multiply the one-hot of every noisy node by N(0, σ²) draws."""
        if sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {sigma}")
        noisy = [int(i) for i in noisy]
        if any(i == 0 or not 0 < i < self.cfg.nodes for i in noisy):
            raise ParameterError("noisy nodes must be non-root node indices (the root stays observable)")
        obs = np.array(state, dtype=np.float64, copy=True)
        for i in noisy:
            sl = self.layout.state_slice(i)
            obs[sl] = obs[sl] * rng.normal(0.0, sigma, size=self.cfg.colors)
        return obs


