from __future__ import annotations

import itertools
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from core.errors import ClassIndexError, DimensionError, ParameterError

# Every node gets a unique, monotonically increasing id; backward uses it as the graph handle.
_node_ids = itertools.count()

# A backward function maps the output gradient to one gradient per parent (None = no contribution).
BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

LOG_STD_MIN = -6.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class Tensor:
    """
    2-D float64 array with a reverse-mode gradient record.

    Vectors are stored as 1×n rows and scalars as 1×1. Only leaves (tensors created
    directly, not by an op) keep `.grad` after backward; intermediate gradients live
    in the backward pass only.
    """

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_2d(np.array(data, dtype=np.float64))
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._op = ""

    # --- construction helpers -------------------------------------------------

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        """Wrap the result of a custom differentiable op (used by ops outside this module too)."""
        out = cls.__new__(cls)
        out.data = _as_2d(np.asarray(data, dtype=np.float64))
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out.node_id = next(_node_ids)
        out._parents = tuple(parents) if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        out._op = op
        return out

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        backward(self, grad)

    # --- operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"


# ---------------------------------------------------------------------------
# Internals
# ---------------------------------------------------------------------------

def _as_2d(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"tensors are at most 2-D, got ndim={arr.ndim}")
    return arr


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _broadcast_shape(a: Tuple[int, int], b: Tuple[int, int]) -> Tuple[int, int]:
    dims = []
    for da, db in zip(a, b):
        if da == db or db == 1:
            dims.append(da)
        elif da == 1:
            dims.append(db)
        else:
            raise DimensionError(f"shapes {a} and {b} do not broadcast")
    return dims[0], dims[1]


def _unbroadcast(g: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    if g.shape != shape:
        raise DimensionError(f"gradient of shape {g.shape} cannot be reduced to {shape}")
    return g


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited: set[int] = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for parent in node._parents:
            if parent.node_id not in visited:
                stack.append((parent, False))
    return order


def backward(root: Tensor, grad: np.ndarray | None = None) -> None:
    """Accumulate d(root)/d(leaf) into every leaf that requires grad."""
    if grad is None:
        if root.data.size != 1:
            raise DimensionError(f"backward without an explicit grad needs a scalar root, got {root.shape}")
        grad = np.ones_like(root.data)
    grad = _as_2d(np.asarray(grad, dtype=np.float64))
    if grad.shape != root.shape:
        raise DimensionError(f"seed grad {grad.shape} does not match root {root.shape}")

    grads: Dict[int, np.ndarray] = {root.node_id: grad}
    for node in reversed(_topological_order(root)):
        g = grads.pop(node.node_id, None)
        if g is None:
            continue
        if node.is_leaf:
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)  # type: ignore[misc]
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            pg = _unbroadcast(np.asarray(pg, dtype=np.float64), parent.shape)
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + pg
            else:
                grads[parent.node_id] = pg


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


# ---------------------------------------------------------------------------
# Elementwise ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    return Tensor.from_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    ad, bd = a.data, b.data
    return Tensor.from_op(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def mask_mul(x, mask) -> Tensor:
    """Elementwise x·mask. The mask may be a constant array or a (straight-through) sampled tensor."""
    return mul(x, mask)


def neg(x) -> Tensor:
    x = as_tensor(x)
    return Tensor.from_op(-x.data, (x,), lambda g: (-g,), "neg")


def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.data > 0
    return Tensor.from_op(x.data * on, (x,), lambda g: (g * on,), "relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * y,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return Tensor.from_op(np.log(xd), (x,), lambda g: (g / xd,), "log")


def square(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return Tensor.from_op(xd * xd, (x,), lambda g: (2.0 * g * xd,), "square")


def clamp(x, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return Tensor.from_op(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,), "clamp")


def stop_gradient(x) -> Tensor:
    """sg[x]: identity forward, no gradient to x."""
    x = as_tensor(x)
    return Tensor(x.data, requires_grad=False)


# ---------------------------------------------------------------------------
# Linear algebra, reductions, layout
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return Tensor.from_op(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def sum(x, axis: int | None = None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    shape = x.shape
    if axis is None:
        data = np.array([[x.data.sum()]])
    elif axis in (0, 1):
        data = x.data.sum(axis=axis, keepdims=True)
    else:
        raise DimensionError(f"axis must be None, 0 or 1, got {axis}")
    return Tensor.from_op(data, (x,), lambda g: (np.broadcast_to(g, shape),), "sum")


def mean(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / count)


def l1_norm(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.data)
    shape = x.shape
    ad = np.abs(x.data)
    if axis is None:
        data = np.array([[ad.sum()]])
    else:
        data = ad.sum(axis=axis, keepdims=True)
    return Tensor.from_op(data, (x,), lambda g: (np.broadcast_to(g, shape) * sign,), "l1_norm")


def concat(tensors: Iterable, axis: int = 1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise DimensionError("concat needs at least one tensor")
    other = 1 - axis
    if any(p.shape[other] != parts[0].shape[other] for p in parts):
        raise DimensionError(f"concat along axis {axis} needs equal sizes on axis {other}")
    sizes = [p.shape[axis] for p in parts]
    cuts = np.cumsum(sizes)[:-1]

    def _back(g: np.ndarray):
        return np.split(g, cuts, axis=axis)

    return Tensor.from_op(np.concatenate([p.data for p in parts], axis=axis), parts, _back, "concat")


def take_cols(x, idx: Sequence[int] | np.ndarray) -> Tensor:
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    shape = x.shape

    def _back(g: np.ndarray):
        gx = np.zeros(shape)
        np.add.at(gx.T, idx, g.T)
        return (gx,)

    return Tensor.from_op(x.data[:, idx], (x,), _back, "take_cols")


def repeat_cols(x, repeats: int) -> Tensor:
    """Repeat every column `repeats` times in place: [a, b] -> [a, a, b, b]."""
    x = as_tensor(x)
    rows, cols = x.shape

    def _back(g: np.ndarray):
        return (g.reshape(rows, cols, repeats).sum(axis=2),)

    return Tensor.from_op(np.repeat(x.data, repeats, axis=1), (x,), _back, "repeat_cols")


# ---------------------------------------------------------------------------
# Losses and stochastic ops
# ---------------------------------------------------------------------------

def categorical_nll(logits, targets) -> Tensor:
    """Per-row −log softmax(logits)[target]; returns a B×1 tensor."""
    logits = as_tensor(logits)
    rows, classes = logits.shape
    if classes < 2:
        raise DimensionError(f"categorical_nll needs at least 2 classes, got {classes}")
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if targets.shape != (rows,):
        raise DimensionError(f"expected {rows} targets, got shape {targets.shape}")
    if np.any(targets < 0) or np.any(targets >= classes):
        raise ClassIndexError(f"target index out of range [0, {classes})")

    z = logits.data
    top = z.max(axis=1, keepdims=True)
    shifted = z - top
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    picked = shifted[np.arange(rows), targets][:, None]
    probs = np.exp(shifted - lse)

    def _back(g: np.ndarray):
        d = probs.copy()
        d[np.arange(rows), targets] -= 1.0
        return (g * d,)

    return Tensor.from_op(lse - picked, (logits,), _back, "categorical_nll")


def gaussian_nll(mean_, log_std, target) -> Tensor:
    """Per-row Σ_d 0.5·((t−μ)/σ)² + log σ + 0.5·log 2π with log σ clamped to [-6, 2]; B×1."""
    mean_, log_std, target = as_tensor(mean_), as_tensor(log_std), as_tensor(target)
    if not (mean_.shape == log_std.shape == target.shape):
        raise DimensionError(f"gaussian_nll shapes differ: {mean_.shape}, {log_std.shape}, {target.shape}")
    ls = clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)
    z = mul(sub(target, mean_), exp(neg(ls)))
    per_dim = add(add(mul(square(z), 0.5), ls), _HALF_LOG_2PI)
    return sum(per_dim, axis=1)


def gumbel_bernoulli(logit, temperature: float, rng: np.random.Generator) -> Tensor:
    """
    Hard {0,1} sample with straight-through gradients of the two-class Gumbel-Softmax.

    The difference of two Gumbel draws is a standard logistic draw, so the relaxed
    sample is sigmoid((logit + L) / τ) and the hard sample is 1[logit + L > 0].
    """
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    logit = as_tensor(logit)
    u = np.clip(rng.random(logit.shape), 1e-12, 1.0 - 1e-12)
    noisy = (logit.data + (np.log(u) - np.log1p(-u))) / temperature
    soft = _sigmoid(noisy)
    hard = (noisy > 0).astype(np.float64)
    return Tensor.from_op(hard, (logit,), lambda g: (g * soft * (1.0 - soft) / temperature,), "gumbel_bernoulli")
