from core.logging_utils import get_logger
from core.state import RunState
from core.training.checkpoint import save_checkpoint

log = get_logger(__name__)


def checkpoint_node(state: RunState) -> RunState:
    """Overwrite the run's checkpoint with the current parameters."""
    save_checkpoint(
        state["checkpoint_path"],
        state["trainer"].model,
        state["config"].config_hash(),
        state["env_steps"],
        state["episode"],
        state["seed"],
    )
    state["last_checkpoint_step"] = state["env_steps"]
    log.debug("checkpoint at step %d", state["env_steps"])
    return state
