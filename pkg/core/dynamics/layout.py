from __future__ import annotations

from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple

import numpy as np

from core.errors import DimensionError, LayoutMismatchError, ParameterError

VariableKind = Literal["categorical", "continuous"]


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: VariableKind
    size: int  # classes for categorical, dimensions for continuous

    def __post_init__(self) -> None:
        if self.kind not in ("categorical", "continuous"):
            raise ParameterError(f"{self.name}: unknown variable kind {self.kind!r}")
        if self.kind == "categorical" and self.size < 2:
            raise ParameterError(f"{self.name}: categorical variables need at least 2 classes")
        if self.size < 1:
            raise ParameterError(f"{self.name}: size must be positive")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    @property
    def head_width(self) -> int:
        """Output width of a predictor head: logits, or mean and log-std."""
        return self.size if self.is_categorical else 2 * self.size


def _offsets(specs: Sequence[VariableSpec]) -> Tuple[int, ...]:
    out, pos = [], 0
    for v in specs:
        out.append(pos)
        pos += v.size
    return tuple(out)


@dataclass(frozen=True)
class FactoredLayout:
    """
    How flat state/action vectors split into variables.

    Rows of an adjacency matrix follow `inputs` (state variables, then action
    variables); columns follow `state`.
    """

    state: Tuple[VariableSpec, ...]
    action: Tuple[VariableSpec, ...]

    def __post_init__(self) -> None:
        if not self.state or not self.action:
            raise ParameterError("a factored layout needs N >= 1 state and M >= 1 action variables")

    @property
    def n_state(self) -> int:
        return len(self.state)

    @property
    def n_action(self) -> int:
        return len(self.action)

    @property
    def inputs(self) -> Tuple[VariableSpec, ...]:
        return self.state + self.action

    @property
    def state_offsets(self) -> Tuple[int, ...]:
        return _offsets(self.state)

    @property
    def action_offsets(self) -> Tuple[int, ...]:
        return _offsets(self.action)

    @property
    def state_dim(self) -> int:
        return sum(v.size for v in self.state)

    @property
    def action_dim(self) -> int:
        return sum(v.size for v in self.action)

    def state_slice(self, j: int) -> slice:
        start = self.state_offsets[j]
        return slice(start, start + self.state[j].size)

    def action_slice(self, m: int) -> slice:
        start = self.action_offsets[m]
        return slice(start, start + self.action[m].size)

    def split_inputs(self, states: np.ndarray, actions: np.ndarray) -> List[np.ndarray]:
        """Per-variable column blocks of a batch, in adjacency row order."""
        states, actions = self.check_batch(states, actions)
        parts = [states[:, self.state_slice(j)] for j in range(self.n_state)]
        parts += [actions[:, self.action_slice(m)] for m in range(self.n_action)]
        return parts

    def check_batch(self, states: np.ndarray, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        if states.shape[1] != self.state_dim:
            raise ParameterError(f"state width {states.shape[1]} != layout state_dim {self.state_dim}")
        if actions.shape[1] != self.action_dim:
            raise ParameterError(f"action width {actions.shape[1]} != layout action_dim {self.action_dim}")
        if states.shape[0] != actions.shape[0]:
            raise DimensionError(f"batch sizes differ: {states.shape[0]} states vs {actions.shape[0]} actions")
        return states, actions

    def class_targets(self, states: np.ndarray, j: int) -> np.ndarray:
        """Class index of categorical variable j in each row (argmax of its one-hot block)."""
        if not self.state[j].is_categorical:
            raise ParameterError(f"variable {self.state[j].name} is not categorical")
        return np.argmax(np.atleast_2d(states)[:, self.state_slice(j)], axis=1)

    def signature(self) -> str:
        """Stable text identity used to match checkpoints against environments."""
        fmt = lambda vs: ",".join(f"{v.name}:{v.kind[0]}{v.size}" for v in vs)  # noqa: E731
        return f"S[{fmt(self.state)}]|A[{fmt(self.action)}]"

    def require_same(self, signature: str) -> None:
        if signature != self.signature():
            raise LayoutMismatchError(f"layout mismatch: checkpoint {signature!r} vs environment {self.signature()!r}")
