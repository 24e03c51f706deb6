from typing import Any, Dict, List, Optional, TypedDict

from core.config import ExperimentConfig
from core.envs.base import Environment
from core.training.trainer import Trainer


class RunState(TypedDict, total=False):
    # --- Inputs ---
    config: ExperimentConfig
    seed: int
    out_dir: str
    traces: bool

    # --- Live objects (one training run, one process) ---
    env: Environment
    trainer: Trainer
    collect_rng: Any
    planner_rng: Any
    explore_rng: Any

    # --- Counters ---
    env_steps: int
    episode: int

    # --- Control flags ---
    stop: bool
    error: Optional[Dict[str, Any]]

    # --- Artifacts ---
    metrics_path: str
    traces_path: Optional[str]
    checkpoint_path: str
    last_checkpoint_step: int
    last_loss: Dict[str, float]
    episode_rewards: List[float]
    reports: List[Dict[str, Any]]
    final_report: Dict[str, Any]
