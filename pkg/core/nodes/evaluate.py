from core.evaluation.pipeline import evaluate
from core.logging_utils import get_logger
from core.records import RecordWriter
from core.state import RunState

log = get_logger(__name__)


def evaluate_node(state: RunState) -> RunState:
    cfg = state["config"]
    report = evaluate(
        state["trainer"].model,
        cfg,
        state["seed"],
        step=state["env_steps"],
        episode=state["episode"],
    )
    record = report.to_record()
    RecordWriter(state["metrics_path"], truncate=False).write(record)
    state["reports"].append(record)
    log.info(
        "episode %d step %d: reward=%.3f success=%.2f shd=%.2f loss=%s",
        state["episode"],
        state["env_steps"],
        report.reward_mean or 0.0,
        report.success_rate or 0.0,
        report.shd or 0.0,
        {k: round(v, 4) for k, v in state.get("last_loss", {}).items()},
    )
    return state
