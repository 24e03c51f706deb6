from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List

import numpy as np

from core.autodiff.optim import Adam
from core.autodiff.rng import Stream, make_rng
from core.autodiff.tensor import Tensor, add, backward, mean, mul
from core.config import ExperimentConfig
from core.dynamics.model import DynamicsModel
from core.envs.base import Environment, Transition
from core.errors import ParameterError, TrainingError
from core.graphs.decoder import l1_penalty
from core.logging_utils import get_logger
from core.training.buffer import Batch, ReplayBuffer
from core.vq.codebook import commitment_loss

log = get_logger(__name__)

Policy = Callable[[np.ndarray], Any]

# Methods that learn a graph and therefore pay the sparsity penalty.
GRAPH_LEARNING = ("fcdl", "ncd")


@dataclass
class LossBreakdown:
    pred_nll: float
    sparsity: float
    quant_sg: float
    commit: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def build_model(cfg: ExperimentConfig, env: Environment, seed: int) -> DynamicsModel:
    return DynamicsModel(env.layout, cfg.model, cfg.method, seed, env.structure.global_graph)


def collect(
    env: Environment,
    buffer: ReplayBuffer,
    policy: Policy,
    steps: int,
    rng: np.random.Generator,
) -> List[Transition]:
    """
    Run `policy` for `steps` environment steps, resetting on episode end, and
    append every transition to the buffer. Returns the appended transitions.
    """
    if steps < 1:
        raise ParameterError("collect needs steps >= 1")
    out: List[Transition] = []
    obs = env.reset(rng)
    for _ in range(steps):
        action = policy(obs)
        state = env.state.copy()  # type: ignore[union-attr]
        result = env.step(action)
        t = Transition(state, env.action_vector(action), result.state, result.context, result.reward, result.done)
        buffer.add(t)
        out.append(t)
        obs = env.reset(rng) if result.done else result.observation
    return out


def random_policy(env: Environment, rng: np.random.Generator) -> Policy:
    return lambda _obs: env.sample_action(rng)


def explore(env: Environment, action: Any, cfg: ExperimentConfig, rng: np.random.Generator) -> Any:
    """Exploration on the executed action only: ε-random for categorical, Gaussian noise for continuous."""
    if env.action_space.kind == "categorical":
        if rng.random() < cfg.training.exploration_prob:
            return env.sample_action(rng)
        return action
    noisy = np.asarray(action, dtype=np.float64) + rng.normal(0.0, cfg.training.exploration_noise, size=env.action_space.size)
    return np.clip(noisy, env.action_space.low, env.action_space.high)


class Trainer:
    """Joint optimization of encoder, graph decoder and dynamics heads; EMA on the codebook."""

    def __init__(self, cfg: ExperimentConfig, env: Environment, seed: int, model: DynamicsModel | None = None):
        self.cfg = cfg
        self.env = env
        self.seed = seed
        self.model = model or build_model(cfg, env, seed)
        self.optimizer = Adam(self.model.parameters(), lr=cfg.training.lr)
        self.buffer = ReplayBuffer(
            cfg.training.buffer_capacity, env.layout.state_dim, env.layout.action_dim, make_rng(seed, Stream.BUFFER)
        )
        self.gumbel_rng = make_rng(seed, Stream.GUMBEL)
        self.restart_rng = make_rng(seed, Stream.CODEBOOK, 1)
        self.step = 0

    # --- loss -----------------------------------------------------------------

    def loss(self, batch: Batch) -> tuple[Tensor, Dict[str, Tensor], Any]:
        model = self.model
        inf, heads = model.forward(batch.states, batch.actions, mode="train", rng=self.gumbel_rng, track=True)
        parts: Dict[str, Tensor] = {"pred_nll": model.nll(heads, batch.next_states, batch.states)}
        if model.method in GRAPH_LEARNING:
            parts["sparsity"] = mul(l1_penalty(inf.graph), self.cfg.training.sparsity)
        if model.codebook is not None:
            cb, commit = commitment_loss(inf.h, Tensor(inf.e), self.cfg.training.commitment)
            parts["quant_sg"] = cb
            parts["commit"] = commit
        per_row = parts["pred_nll"]
        for key in ("sparsity", "quant_sg", "commit"):
            if key in parts:
                per_row = add(per_row, parts[key])
        return mean(per_row), parts, inf

    def train_step(self, batch: Batch) -> LossBreakdown:
        if len(batch) == 0:
            raise ParameterError("train_step needs a nonempty batch")
        self.optimizer.zero_grad()
        total, parts, inf = self.loss(batch)
        summary = {k: float(np.mean(v.data)) for k, v in parts.items()}
        breakdown = LossBreakdown(
            pred_nll=summary["pred_nll"],
            sparsity=summary.get("sparsity", 0.0),
            quant_sg=summary.get("quant_sg", 0.0),
            commit=summary.get("commit", 0.0),
            total=total.item(),
        )
        if not all(np.isfinite(v) for v in breakdown.to_dict().values()):
            log.warning("non-finite loss at step %d: %s", self.step, breakdown.to_dict())
            raise TrainingError(f"non-finite loss at step {self.step}", {"step": self.step, **breakdown.to_dict()})

        backward(total)
        self.optimizer.step()
        self.step += 1

        codebook = self.model.codebook
        if codebook is not None:
            codebook.ema_update(inf.h.data, inf.z)
            mcfg = self.cfg.model
            if mcfg.restart_enabled() and self.step % mcfg.restart_every == 0:
                restarted = codebook.dead_code_restart(mcfg.restart_fraction(), self.restart_rng)
                if restarted:
                    log.warning("step %d: restarted dead codes %s", self.step, restarted)
        return breakdown

    def update(self, n: int) -> List[LossBreakdown]:
        return [self.train_step(self.buffer.sample(self.cfg.training.batch_size)) for _ in range(n)]

    # --- diagnostics ----------------------------------------------------------

    def grad_norms(self) -> Dict[str, float]:
        """L2 norm of the last step's gradient per parameter group (features, encoder, decoder, heads, dense)."""
        norms: Dict[str, float] = {}
        for group, params in self.model.parameter_groups().items():
            sq = sum(float((p.grad**2).sum()) for p in params if p.grad is not None)
            norms[group] = float(np.sqrt(sq))
        return norms
