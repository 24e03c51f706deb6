from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from core.autodiff import tensor as T
from core.autodiff.rng import make_rng
from core.autodiff.tensor import Tensor

Shape = Tuple[int, int]


@dataclass
class GradCase:
    name: str
    fn: Callable[[List[Tensor]], Tensor]  # inputs -> tensor of any shape; reduced with fixed weights
    shapes: Sequence[Shape]
    kinks: Sequence[float] = ()  # input values where the op is not differentiable
    low: float = -2.0
    high: float = 2.0


@dataclass
class GradCheckRow:
    op: str
    instances: int
    max_rel_error: float
    passed: bool


def relative_error(analytic: np.ndarray, numeric: np.ndarray, tiny: float = 1e-4) -> float:
    """
    Elementwise |a−n| / max(|a| + |n|, tiny), maximised. `tiny` sits at the
    finite-difference noise level; only entries below it are compared absolutely.
    """
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), tiny)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _sample_inputs(case: GradCase, rng: np.random.Generator) -> List[np.ndarray]:
    arrays = []
    for shape in case.shapes:
        x = rng.uniform(case.low, case.high, size=shape)
        for k in case.kinks:
            close = np.abs(x - k) < 1e-2
            x[close] = k + np.where(x[close] >= k, 1e-2, -1e-2)
        arrays.append(x)
    return arrays


def _scalar(case: GradCase, arrays: List[np.ndarray], weights: np.ndarray | None, requires_grad: bool):
    inputs = [Tensor(a, requires_grad=requires_grad) for a in arrays]
    out = case.fn(inputs)
    if weights is None:
        return inputs, out
    return inputs, T.sum(T.mul(out, weights))


def check_case(case: GradCase, rng: np.random.Generator, instances: int = 100, h: float = 1e-5, tol: float = 1e-5) -> GradCheckRow:
    worst = 0.0
    for _ in range(instances):
        arrays = _sample_inputs(case, rng)
        _, out = _scalar(case, arrays, None, False)
        weights = rng.uniform(-1.0, 1.0, size=out.shape)

        inputs, loss = _scalar(case, arrays, weights, True)
        loss.backward()

        for idx, base in enumerate(arrays):
            numeric = np.zeros_like(base)
            for pos in np.ndindex(base.shape):
                orig = base[pos]
                base[pos] = orig + h
                up = _scalar(case, arrays, weights, False)[1].item()
                base[pos] = orig - h
                down = _scalar(case, arrays, weights, False)[1].item()
                base[pos] = orig
                numeric[pos] = (up - down) / (2.0 * h)
            analytic = inputs[idx].grad if inputs[idx].grad is not None else np.zeros_like(base)
            worst = max(worst, relative_error(analytic, numeric))
    return GradCheckRow(op=case.name, instances=instances, max_rel_error=worst, passed=worst <= tol)


def default_cases() -> List[GradCase]:
    targets = np.array([0, 2, 1])
    mask = np.array([[1.0, 0.0, 1.0, 1.0], [0.0, 1.0, 1.0, 0.0], [1.0, 1.0, 0.0, 0.0]])
    return [
        GradCase("add", lambda x: T.add(x[0], x[1]), [(3, 4), (1, 4)]),
        GradCase("sub", lambda x: T.sub(x[0], x[1]), [(3, 4), (3, 1)]),
        GradCase("mul", lambda x: T.mul(x[0], x[1]), [(3, 4), (3, 4)]),
        GradCase("matmul", lambda x: T.matmul(x[0], x[1]), [(3, 4), (4, 2)]),
        GradCase("relu", lambda x: T.relu(x[0]), [(3, 4)], kinks=(0.0,)),
        GradCase("tanh", lambda x: T.tanh(x[0]), [(3, 4)]),
        GradCase("sigmoid", lambda x: T.sigmoid(x[0]), [(3, 4)]),
        GradCase("exp", lambda x: T.exp(x[0]), [(3, 4)]),
        GradCase("log", lambda x: T.log(x[0]), [(3, 4)], low=0.5, high=2.0),
        GradCase("square", lambda x: T.square(x[0]), [(3, 4)]),
        GradCase("clamp", lambda x: T.clamp(x[0], -1.0, 1.0), [(3, 4)], kinks=(-1.0, 1.0)),
        GradCase("sum", lambda x: T.sum(x[0], axis=1), [(3, 4)]),
        GradCase("mean", lambda x: T.mean(x[0], axis=0), [(3, 4)]),
        GradCase("l1_norm", lambda x: T.l1_norm(x[0], axis=1), [(3, 4)], kinks=(0.0,)),
        GradCase("concat", lambda x: T.concat([x[0], x[1]], axis=1), [(3, 2), (3, 3)]),
        GradCase("take_cols", lambda x: T.take_cols(x[0], [2, 0, 2]), [(3, 4)]),
        GradCase("repeat_cols", lambda x: T.repeat_cols(x[0], 3), [(3, 2)]),
        GradCase("mask_mul", lambda x: T.mask_mul(x[0], mask), [(3, 4)]),
        GradCase("categorical_nll", lambda x: T.categorical_nll(x[0], targets), [(3, 4)]),
        GradCase("gaussian_nll", lambda x: T.gaussian_nll(x[0], x[1], x[2]), [(3, 2), (3, 2), (3, 2)], high=1.5),
        GradCase("shared_subexpression", lambda x: T.add(T.mul(x[0], x[0]), T.tanh(x[0])), [(2, 3)]),
    ]


def run_gradcheck(cases: Sequence[GradCase] | None = None, seed: int = 0, instances: int = 100, tol: float = 1e-5) -> List[GradCheckRow]:
    rng = make_rng(seed)
    return [check_case(c, rng, instances=instances, tol=tol) for c in (cases or default_cases())]
