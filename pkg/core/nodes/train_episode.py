from core.envs.base import Transition
from core.errors import TrainingError
from core.logging_utils import get_logger
from core.planning.cem import CemParams, CemPlanner
from core.records import RecordWriter
from core.state import RunState
from core.training.trainer import explore

log = get_logger(__name__)


def train_episode_node(state: RunState) -> RunState:
    """
    One planner-driven episode. Every executed step is stored and followed by
    `updates_per_step` gradient steps. Reaching the step budget sets `stop`.
    """
    cfg = state["config"]
    env, trainer = state["env"], state["trainer"]
    rng, explore_rng = state["collect_rng"], state["explore_rng"]
    planner = CemPlanner(trainer.model, env, CemParams.from_config(cfg, env), state["planner_rng"])
    budget = cfg.total_steps()

    tracer = RecordWriter(state["traces_path"], truncate=False) if state.get("traces_path") else None
    obs = env.reset(rng)
    total_reward = 0.0
    try:
        while True:
            action = explore(env, planner.plan(obs, env.goal), cfg, explore_rng)
            prev = env.state.copy()
            result = env.step(action)
            executed = Transition(prev, env.action_vector(action), result.state, result.context, result.reward, result.done)
            trainer.buffer.add(executed)
            if tracer is not None:
                tracer.write(executed.to_record())
            total_reward += result.reward
            state["env_steps"] += 1
            losses = trainer.update(cfg.training.updates_per_step)
            if losses:
                state["last_loss"] = losses[-1].to_dict()
            obs = result.observation
            if state["env_steps"] >= budget:
                state["stop"] = True
            if result.done or state["stop"]:
                break
    except TrainingError as err:
        log.warning("stopping: %s", err)
        state["stop"] = True
        state["error"] = {"message": str(err), **err.diagnostics}
        return state

    state["episode"] += 1
    state["episode_rewards"].append(total_reward)
    log.debug("episode %d reward=%.3f steps=%d", state["episode"], total_reward, state["env_steps"])
    every = cfg.training.metrics_every
    if every and state["episode"] % every == 0:
        RecordWriter(state["metrics_path"], truncate=False).write(
            {
                "kind": "train",
                "episode": state["episode"],
                "step": state["env_steps"],
                "reward": total_reward,
                "loss": state["last_loss"],
                "grad_norms": trainer.grad_norms(),
                "buffer": len(trainer.buffer),
            }
        )
    return state


def eval_due(state: RunState) -> bool:
    every = state["config"].evaluation.every_episodes
    return bool(every) and state["episode"] > 0 and state["episode"] % every == 0


def checkpoint_due(state: RunState) -> bool:
    every = state["config"].training.checkpoint_every
    return bool(every) and state["episode"] > 0 and state["episode"] % every == 0

