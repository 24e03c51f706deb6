from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from core.autodiff.tensor import Tensor


@dataclass
class Adam:
    params: List[Tensor]
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.m:
            self.m = [np.zeros_like(p.data) for p in self.params]
        if not self.v:
            self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self)


def adam_step(opt: Adam) -> None:
    """Bias-corrected Adam update, in place. Parameters without a gradient are left alone."""
    opt.step_count += 1
    t = opt.step_count
    c1 = 1.0 - opt.beta1**t
    c2 = 1.0 - opt.beta2**t
    for p, m, v in zip(opt.params, opt.m, opt.v):
        if p.grad is None:
            continue
        g = p.grad
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p.data -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
