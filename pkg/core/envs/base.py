from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Sequence, Tuple

import numpy as np

from core.dynamics.layout import FactoredLayout
from core.errors import ParameterError
from core.graphs.adjacency import AdjacencyMatrix, LocalCausalGraph

ContextPredicate = Callable[[np.ndarray, Any], bool]


@dataclass(frozen=True)
class ContextSpec:
    name: str
    member: ContextPredicate
    graph: AdjacencyMatrix


@dataclass(frozen=True)
class GroundTruthStructure:
    """Global causal graph plus one named LCG per context. Contexts partition (s, a)."""

    global_graph: AdjacencyMatrix
    contexts: Tuple[ContextSpec, ...]

    def __post_init__(self) -> None:
        for ctx in self.contexts:
            if not ctx.graph.issubset(self.global_graph):
                raise ParameterError(f"LCG of context {ctx.name!r} is not a subgraph of the global graph")

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.contexts]

    def context_of(self, state: np.ndarray, action: Any) -> str:
        hits = [c.name for c in self.contexts if c.member(state, action)]
        if len(hits) != 1:
            raise ParameterError(f"contexts must partition the domain; (s, a) falls in {hits}")
        return hits[0]

    def lcg(self, name: str) -> AdjacencyMatrix:
        for c in self.contexts:
            if c.name == name:
                return c.graph
        raise KeyError(name)

    def redundant_edges(self, name: str) -> int:
        """Edges of the global graph that are locally spurious in `name`."""
        return self.global_graph.edge_count() - self.lcg(name).edge_count()


@dataclass(frozen=True)
class ActionSpace:
    kind: Literal["categorical", "continuous"]
    size: int  # number of actions, or action dimension
    low: float = 0.0
    high: float = 0.0


@dataclass
class StepResult:
    state: np.ndarray  # true next state
    observation: np.ndarray  # what the agent sees (noisy in downstream mode)
    reward: float
    done: bool
    success: bool
    context: str


@dataclass
class Transition:
    """One (s, a, s') triple. `context` is a ground-truth label for evaluation, never a model input."""

    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    context: str
    reward: float = 0.0
    done: bool = False

    def to_record(self) -> Dict[str, Any]:
        return {
            "state": self.state.tolist(),
            "action": self.action.tolist(),
            "next_state": self.next_state.tolist(),
            "reward": self.reward,
            "done": self.done,
            "context": self.context,
        }


class Environment(ABC):
    """
    A deterministic factored MDP with ground-truth structure.

    `transition` is the pure dynamics; `reset`/`step` drive one episode and keep
    the current state, goal and step counter on the instance.
    """

    layout: FactoredLayout
    structure: GroundTruthStructure
    action_space: ActionSpace
    episode_length: int
    ood_sigma: float = 100.0

    def __init__(self) -> None:
        self.state: np.ndarray | None = None
        self.goal: np.ndarray | None = None
        self.t = 0
        self.noisy: Tuple[int, ...] = ()
        self._obs_rng: np.random.Generator | None = None

    # --- dynamics -------------------------------------------------------------

    @abstractmethod
    def initial_state(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """(state, goal) for a fresh episode."""

    @abstractmethod
    def transition(self, state: np.ndarray, action: Any) -> np.ndarray:
        ...

    @abstractmethod
    def reward(self, state: np.ndarray, goal: np.ndarray) -> float:
        ...

    @abstractmethod
    def rewards(self, states: np.ndarray, goal: np.ndarray) -> np.ndarray:
        """Batched reward over rows of `states`."""

    @abstractmethod
    def success(self, state: np.ndarray, goal: np.ndarray) -> bool:
        ...

    @abstractmethod
    def make_ood(
        self, state: np.ndarray, noisy: Sequence[int], sigma: float, rng: np.random.Generator
    ) -> np.ndarray:
        ...

    @abstractmethod
    def action_vector(self, action: Any) -> np.ndarray:
        """Flat float encoding of a native action, as fed to the model."""

    @abstractmethod
    def action_from_vector(self, vector: np.ndarray) -> Any:
        ...

    @abstractmethod
    def sample_action(self, rng: np.random.Generator) -> Any:
        ...

    def noisy_candidates(self) -> List[int]:
        """Variables that may be perturbed in OOD data; the root (index 0) never is."""
        return list(range(1, self.layout.n_state))

    def observe(self, state: np.ndarray) -> np.ndarray:
        if not self.noisy or self._obs_rng is None:
            return state.copy()
        return self.make_ood(state, self.noisy, self.ood_sigma, self._obs_rng)

    # --- episode API ----------------------------------------------------------

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state, self.goal = self.initial_state(rng)
        self.t = 0
        self._obs_rng = rng
        return self.observe(self.state)

    def step(self, action: Any) -> StepResult:
        if self.state is None or self.goal is None:
            raise ParameterError("step() called before reset()")
        context = self.structure.context_of(self.state, action)
        self.state = self.transition(self.state, action)
        self.t += 1
        success = self.success(self.state, self.goal)
        done = success or self.t >= self.episode_length
        return StepResult(
            state=self.state.copy(),
            observation=self.observe(self.state),
            reward=self.reward(self.state, self.goal),
            done=done,
            success=success,
            context=context,
        )

    # --- ground truth ---------------------------------------------------------

    def context_of(self, state: np.ndarray, action: Any) -> str:
        return self.structure.context_of(state, action)

    def true_local_graph(self, state: np.ndarray, action: Any) -> LocalCausalGraph:
        name = self.context_of(state, action)
        return LocalCausalGraph(name, self.structure.lcg(name))

    def oracle_dynamics(self) -> "TrueDynamics":
        return TrueDynamics(self)


@dataclass
class TrueDynamics:
    """The environment's own transition behind the model's `predict_next` interface."""

    env: Environment
    layout: FactoredLayout = field(init=False)

    def __post_init__(self) -> None:
        self.layout = self.env.layout

    def predict_next(self, states, actions) -> np.ndarray:
        states, actions = self.layout.check_batch(states, actions)
        return np.stack(
            [self.env.transition(s, self.env.action_from_vector(a)) for s, a in zip(states, actions)]
        )
