from pathlib import Path

import orjson

from core.logging_utils import get_logger
from core.nodes.checkpoint import checkpoint_node
from core.nodes.evaluate import evaluate_node
from core.records import RecordWriter
from core.state import RunState

log = get_logger(__name__)


def final_report_node(state: RunState) -> RunState:
    """
    Final checkpoint and evaluation. After a training error the last good
    checkpoint is left untouched and only the error is recorded.
    """
    error = state.get("error")
    if error:
        RecordWriter(state["metrics_path"], truncate=False).write({"kind": "error", **error})
        log.error("run stopped at step %d: %s", state.get("env_steps", 0), error.get("message"))
    else:
        checkpoint_node(state)
        evaluate_node(state)

    state["final_report"] = {
        "seed": state["seed"],
        "config_hash": state["config"].config_hash(),
        "steps": state.get("env_steps", 0),
        "episodes": state.get("episode", 0),
        "checkpoint": state["checkpoint_path"] if state.get("last_checkpoint_step", -1) >= 0 else None,
        "error": error,
        "traces": state.get("traces_path"),
        "last_eval": state["reports"][-1] if state.get("reports") else None,
    }
    Path(state["out_dir"], "report.json").write_bytes(
        orjson.dumps(state["final_report"], option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)
    )
    return state
