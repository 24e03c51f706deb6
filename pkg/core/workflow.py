from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Sequence

from langgraph.graph import END, START, StateGraph

from core.config import ExperimentConfig
from core.errors import ConfigError
from core.evaluation.report import EvalReport, aggregate_by_codebook_size
from core.logging_utils import get_logger
from core.nodes.checkpoint import checkpoint_node
from core.nodes.evaluate import evaluate_node
from core.nodes.final_report import final_report_node
from core.nodes.setup_run import setup_run_node
from core.nodes.train_episode import checkpoint_due, eval_due, train_episode_node
from core.nodes.warmup_collect import warmup_collect_node
from core.state import RunState

log = get_logger(__name__)

DEFAULT_K_SWEEP = (1, 2, 4, 8, 16)


def _after_episode(state: RunState) -> str:
    if state.get("stop"):
        return "FINAL"
    if eval_due(state):
        return "EVALUATE"
    if checkpoint_due(state):
        return "CHECKPOINT"
    return "TRAIN"


def _after_eval(state: RunState) -> str:
    return "CHECKPOINT" if checkpoint_due(state) else "TRAIN"


def build_train_app():
    graph = StateGraph(RunState)

    graph.add_node("SETUP_RUN", setup_run_node)
    graph.add_node("WARMUP_COLLECT", warmup_collect_node)
    graph.add_node("TRAIN_EPISODE", train_episode_node)
    graph.add_node("EVALUATE", evaluate_node)
    graph.add_node("CHECKPOINT", checkpoint_node)
    graph.add_node("FINAL_REPORT", final_report_node)

    graph.add_edge(START, "SETUP_RUN")
    graph.add_edge("SETUP_RUN", "WARMUP_COLLECT")

    # A failed warmup skips training entirely.
    graph.add_conditional_edges(
        "WARMUP_COLLECT",
        lambda s: "FINAL" if s.get("stop") else "TRAIN",
        {"FINAL": "FINAL_REPORT", "TRAIN": "TRAIN_EPISODE"},
    )
    graph.add_conditional_edges(
        "TRAIN_EPISODE",
        _after_episode,
        {"FINAL": "FINAL_REPORT", "EVALUATE": "EVALUATE", "CHECKPOINT": "CHECKPOINT", "TRAIN": "TRAIN_EPISODE"},
    )
    graph.add_conditional_edges("EVALUATE", _after_eval, {"CHECKPOINT": "CHECKPOINT", "TRAIN": "TRAIN_EPISODE"})
    graph.add_edge("CHECKPOINT", "TRAIN_EPISODE")
    graph.add_edge("FINAL_REPORT", END)

    return graph.compile()


def recursion_limit(cfg: ExperimentConfig) -> int:
    """Upper bound on graph steps: at most three nodes per episode plus setup and final."""
    episodes = cfg.total_steps() - cfg.init_steps()
    return 3 * max(episodes, 1) + 10


def run_training(
    cfg: ExperimentConfig, seed: int, out_dir: str | Path | None = None, traces: bool = False
) -> RunState:
    """Train one seed end to end; returns the final run state. `traces` adds <out>/traces.jsonl."""
    app = build_train_app()
    initial: RunState = {"config": cfg, "seed": seed, "traces": traces}
    if out_dir is not None:
        initial["out_dir"] = str(out_dir)
    return app.invoke(initial, config={"recursion_limit": recursion_limit(cfg)})


def _run_seed(cfg: ExperimentConfig, seed: int, out_dir: str, traces: bool = False) -> Dict[str, Any]:
    return run_training(cfg, seed, out_dir, traces)["final_report"]


def run_seeds(
    cfg: ExperimentConfig, out_root: str | Path | None = None, workers: int = 1, traces: bool = False
) -> List[Dict[str, Any]]:
    """
    One run per configured seed, each in <out_root>/<seed>/. With workers > 1
    the seeds run in separate processes.
    """
    root = Path(out_root or cfg.output_dir)
    jobs = [(cfg, seed, str(root / str(seed)), traces) for seed in cfg.seeds]
    if workers <= 1 or len(jobs) == 1:
        return [_run_seed(*job) for job in jobs]
    log.info("running %d seeds on %d workers", len(jobs), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seed, *zip(*jobs)))


def run_k_sweep(
    cfg: ExperimentConfig,
    ks: Sequence[int] = DEFAULT_K_SWEEP,
    out_root: str | Path | None = None,
    workers: int = 1,
) -> Dict[int, Dict[str, Any]]:
    """
    Codebook-size ablation: every configured seed for each K, in <out_root>/k<K>/<seed>/.
    Returns the seed aggregate of the final evaluation per K. Runs that stopped on a
    training error are left out of their K's aggregate.
    """
    if cfg.method != "fcdl":
        raise ConfigError(f"the codebook-size sweep needs method fcdl, got {cfg.method!r}", ["method"])
    if not ks:
        raise ConfigError("the codebook-size sweep needs at least one K", ["model.codebook_size"])
    root = Path(out_root or cfg.output_dir)
    reports: List[EvalReport] = []
    for k in ks:
        results = run_seeds(cfg.with_updates(**{"model.codebook_size": k}), root / f"k{k}", workers)
        for r in results:
            if r.get("error") or r.get("last_eval") is None:
                log.warning("K=%d seed %d stopped early: %s", k, r["seed"], (r.get("error") or {}).get("message"))
                continue
            record = dict(r["last_eval"])
            record.pop("kind", None)
            reports.append(EvalReport.model_validate(record))
    return aggregate_by_codebook_size(reports)
