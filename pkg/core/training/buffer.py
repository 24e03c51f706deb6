from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from core.envs.base import Transition
from core.errors import ParameterError


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    contexts: List[str]
    index: np.ndarray

    def __len__(self) -> int:
        return len(self.states)


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entries are overwritten first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, rng: np.random.Generator):
        if capacity < 1:
            raise ParameterError("buffer capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.contexts: List[str] = [""] * capacity
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        i = self.pos
        self.states[i] = t.state
        self.actions[i] = t.action
        self.next_states[i] = t.next_state
        self.contexts[i] = t.context
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def take(self, index: np.ndarray) -> Batch:
        index = np.asarray(index, dtype=np.int64)
        return Batch(
            states=self.states[index].copy(),
            actions=self.actions[index].copy(),
            next_states=self.next_states[index].copy(),
            contexts=[self.contexts[i] for i in index],
            index=index,
        )

    def sample(self, batch_size: int) -> Batch:
        """Uniform draw with replacement of min(batch_size, size) stored items."""
        if self.size == 0:
            raise ParameterError("cannot sample from an empty buffer")
        return self.take(self.rng.integers(self.size, size=min(batch_size, self.size)))

    def all(self) -> Batch:
        return self.take(np.arange(self.size))
