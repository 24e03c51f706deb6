from core.training.buffer import Batch, ReplayBuffer
from core.training.checkpoint import Checkpoint, load_checkpoint, restore_model, save_checkpoint
from core.training.trainer import LossBreakdown, Trainer, build_model, collect, explore, random_policy

__all__ = [
    "Batch", "ReplayBuffer", "Checkpoint", "load_checkpoint", "restore_model", "save_checkpoint",
    "LossBreakdown", "Trainer", "build_model", "collect", "explore", "random_policy",
]
