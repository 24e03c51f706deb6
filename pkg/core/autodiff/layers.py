from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np

from core.autodiff.tensor import Tensor, add, matmul, relu


class Module:
    """Anything that owns trainable tensors. Subclasses list them in `named_parameters`."""

    def named_parameters(self) -> Dict[str, Tensor]:
        raise NotImplementedError

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, blobs: Dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters().items():
            if name not in blobs:
                raise KeyError(f"missing parameter blob: {name}")
            value = np.asarray(blobs[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{name}: expected shape {p.shape}, got {value.shape}")
            p.data[...] = value


def _prefixed(prefix: str, params: Dict[str, Tensor]) -> Dict[str, Tensor]:
    return {f"{prefix}.{k}": v for k, v in params.items()}


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(in_dim)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(rng.uniform(-bound, bound, size=(in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(rng.uniform(-bound, bound, size=(1, out_dim)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.weight), self.bias)

    def named_parameters(self) -> Dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}


class MLP(Module):
    """Dense layers with ReLU between them; the last layer is linear."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.layers = [Dense(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = relu(x)
        return x

    def named_parameters(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out.update(_prefixed(f"layers.{i}", layer.named_parameters()))
        return out


def prefixed(prefix: str, params: Dict[str, Tensor]) -> Dict[str, Tensor]:
    return _prefixed(prefix, params)
