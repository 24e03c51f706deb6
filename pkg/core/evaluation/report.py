from __future__ import annotations

from typing import Any, Dict, List, Sequence

import numpy as np
from pydantic import BaseModel, Field

from core.errors import ParameterError


class EvalReport(BaseModel):
    """One evaluation point of one seed."""

    seed: int
    config_hash: str
    method: str
    env: str
    codebook_size: int = 1  # effective K; 1 for every method that does not quantize
    step: int = 0
    episode: int = 0
    shd: float | None = None
    shd_per_context: Dict[str, float] = Field(default_factory=dict)
    accuracy: Dict[str, float] = Field(default_factory=dict)  # keyed by noisy-variable count
    mae: Dict[str, float] = Field(default_factory=dict)
    histogram: Dict[str, List[int]] = Field(default_factory=dict)  # context -> per-code counts
    perplexity: float | None = None
    reward_mean: float | None = None
    reward_std: float | None = None
    success_rate: float | None = None
    redundant_edges: Dict[str, int] = Field(default_factory=dict)

    def to_record(self) -> Dict[str, Any]:
        return {"kind": "eval", **self.model_dump(mode="json")}


def _flatten(report: EvalReport) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for key in ("shd", "perplexity", "reward_mean", "success_rate"):
        value = getattr(report, key)
        if value is not None:
            out[key] = float(value)
    for group in ("shd_per_context", "accuracy", "mae"):
        for k, v in getattr(report, group).items():
            out[f"{group}.{k}"] = float(v)
    return out


def aggregate(reports: Sequence[EvalReport]) -> Dict[str, Any]:
    """Mean ± std over seeds of every numeric metric. Reports must share one config hash."""
    if not reports:
        raise ParameterError("nothing to aggregate")
    hashes = {r.config_hash for r in reports}
    if len(hashes) != 1:
        raise ParameterError(f"refusing to aggregate reports from different configs: {sorted(hashes)}")
    flat = [_flatten(r) for r in reports]
    keys = sorted(set().union(*flat))
    metrics = {}
    for key in keys:
        values = np.array([f[key] for f in flat if key in f])
        metrics[key] = {"mean": float(values.mean()), "std": float(values.std()), "n": int(len(values))}
    return {
        "kind": "aggregate",
        "config_hash": hashes.pop(),
        "codebook_size": reports[0].codebook_size,
        "seeds": sorted(r.seed for r in reports),
        "metrics": metrics,
    }


def aggregate_by_codebook_size(reports: Sequence[EvalReport]) -> Dict[int, Dict[str, Any]]:
    """One `aggregate` per effective K, in increasing K."""
    groups: Dict[int, List[EvalReport]] = {}
    for r in reports:
        groups.setdefault(r.codebook_size, []).append(r)
    return {k: aggregate(groups[k]) for k in sorted(groups)}
