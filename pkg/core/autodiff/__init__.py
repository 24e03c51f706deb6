from core.autodiff.layers import MLP, Dense, Module
from core.autodiff.optim import Adam, adam_step
from core.autodiff.rng import Stream, make_rng, split
from core.autodiff.tensor import (
    Tensor,
    add,
    backward,
    categorical_nll,
    clamp,
    concat,
    exp,
    gaussian_nll,
    gumbel_bernoulli,
    l1_norm,
    log,
    mask_mul,
    matmul,
    mean,
    mul,
    neg,
    relu,
    repeat_cols,
    sigmoid,
    square,
    stop_gradient,
    sub,
    take_cols,
    tanh,
)

__all__ = [
    "MLP", "Dense", "Module", "Adam", "adam_step", "Stream", "make_rng", "split", "Tensor",
    "add", "backward", "categorical_nll", "clamp", "concat", "exp", "gaussian_nll",
    "gumbel_bernoulli", "l1_norm", "log", "mask_mul", "matmul", "mean", "mul", "neg", "relu",
    "repeat_cols", "sigmoid", "square", "stop_gradient", "sub", "take_cols", "tanh",
]
