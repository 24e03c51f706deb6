from core.evaluation.metrics import (
    EpisodeStats,
    EvalDataset,
    build_dataset,
    codebook_context_histogram,
    dominant_code,
    episode_eval,
    prediction_accuracy,
    prediction_mae,
    shd,
    shd_by_context,
)
from core.evaluation.pipeline import dump_lcgs, evaluate, make_test_env, ood_dataset
from core.evaluation.report import EvalReport, aggregate, aggregate_by_codebook_size

__all__ = [
    "EpisodeStats", "EvalDataset", "build_dataset", "codebook_context_histogram", "dominant_code",
    "episode_eval", "prediction_accuracy", "prediction_mae", "shd", "shd_by_context", "dump_lcgs",
    "evaluate", "make_test_env", "ood_dataset", "EvalReport", "aggregate", "aggregate_by_codebook_size",
]
