from core.errors import TrainingError
from core.logging_utils import get_logger
from core.records import RecordWriter
from core.state import RunState
from core.training.trainer import collect, random_policy

log = get_logger(__name__)


def warmup_collect_node(state: RunState) -> RunState:
    """Random-policy data collection, then the optional warmup updates."""
    cfg = state["config"]
    env, trainer, rng = state["env"], state["trainer"], state["collect_rng"]

    steps = cfg.init_steps()
    transitions = collect(env, trainer.buffer, random_policy(env, rng), steps, rng)
    if state.get("traces_path"):
        RecordWriter(state["traces_path"], truncate=False).write_many(t.to_record() for t in transitions)
    state["env_steps"] = steps
    log.info("collected %d random transitions", steps)

    try:
        losses = trainer.update(cfg.training.warmup_updates)
    except TrainingError as err:
        state["stop"] = True
        state["error"] = {"message": str(err), **err.diagnostics}
        return state
    if losses:
        state["last_loss"] = losses[-1].to_dict()
    return state
