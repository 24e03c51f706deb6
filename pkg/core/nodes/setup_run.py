from pathlib import Path

from core.autodiff.rng import Stream, make_rng
from core.envs import make_env
from core.logging_utils import get_logger
from core.records import RecordWriter
from core.state import RunState
from core.training.trainer import Trainer

log = get_logger(__name__)


def setup_run_node(state: RunState) -> RunState:
    """
    Build the environment, model and trainer for one seed and start a fresh
    metrics file in the run directory (and a trace file when traces are on).
    """
    cfg = state["config"]
    seed = int(state.get("seed", cfg.seeds[0]))
    out = Path(state.get("out_dir") or Path(cfg.output_dir) / str(seed))
    out.mkdir(parents=True, exist_ok=True)

    env = make_env(cfg, seed)
    state["seed"] = seed
    state["out_dir"] = str(out)
    state["env"] = env
    state["trainer"] = Trainer(cfg, env, seed)
    state["collect_rng"] = make_rng(seed, Stream.ENV, 1)
    state["planner_rng"] = make_rng(seed, Stream.PLANNER)
    state["explore_rng"] = make_rng(seed, Stream.EXPLORE)
    state["env_steps"] = 0
    state["episode"] = 0
    state["stop"] = False
    state["error"] = None
    state["reports"] = []
    state["episode_rewards"] = []
    state["last_loss"] = {}
    state["last_checkpoint_step"] = -1
    state["metrics_path"] = str(out / "metrics.jsonl")
    state["checkpoint_path"] = str(out / "checkpoint.bin")
    state["traces_path"] = None
    if state.get("traces"):
        state["traces_path"] = str(out / "traces.jsonl")
        RecordWriter(state["traces_path"])

    RecordWriter(state["metrics_path"]).write(
        {"kind": "run", "seed": seed, "config_hash": cfg.config_hash(), "method": cfg.method, "env": cfg.env}
    )
    log.info("run %s seed=%d method=%s -> %s", cfg.env, seed, cfg.method, out)
    return state
