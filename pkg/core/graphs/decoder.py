from __future__ import annotations

from typing import Dict, Literal

import numpy as np

from core.autodiff.layers import MLP, Module, prefixed
from core.autodiff.tensor import Tensor, _sigmoid, as_tensor, gumbel_bernoulli, sum as tsum
from core.errors import ParameterError
from core.graphs.adjacency import AdjacencyMatrix

SampleMode = Literal["train", "eval"]


class GraphDecoder(Module):
    """Code vector -> Bernoulli logits over the (N+M)×N adjacency, flattened row-major."""

    def __init__(self, code_dim: int, n_state: int, n_action: int, rng: np.random.Generator, hidden: int = 32):
        self.n_state = n_state
        self.n_action = n_action
        self.net = MLP([code_dim, hidden, (n_state + n_action) * n_state], rng)

    @property
    def n_entries(self) -> int:
        return (self.n_state + self.n_action) * self.n_state

    def decode_logits(self, e) -> Tensor:
        return self.net(as_tensor(e))

    def named_parameters(self) -> Dict[str, Tensor]:
        return prefixed("net", self.net.named_parameters())


def sample_graph(logits, temperature: float, rng: np.random.Generator | None, mode: SampleMode) -> Tensor:
    """
    train: per-entry hard Gumbel sample with straight-through gradients.
    eval: deterministic entry = 1 iff sigmoid(logit) > 0.5 (exact 0.5 -> 0), no gradient.
    """
    logits = as_tensor(logits)
    if mode == "train":
        if rng is None:
            raise ParameterError("train-mode graph sampling needs an rng")
        return gumbel_bernoulli(logits, temperature, rng)
    if mode == "eval":
        return Tensor((_sigmoid(logits.data) > 0.5).astype(np.float64))
    raise ParameterError(f"unknown sample mode: {mode}")


def l1_penalty(graph) -> Tensor:
    """Per-row ‖A‖₁ of (relaxed, nonnegative) adjacency samples; B×1."""
    return tsum(as_tensor(graph), axis=1)


def rows_to_adjacency(graph: np.ndarray, n_state: int, n_action: int) -> list[AdjacencyMatrix]:
    graph = np.atleast_2d(np.asarray(graph))
    return [AdjacencyMatrix.from_flat(row, n_state, n_action) for row in graph]
