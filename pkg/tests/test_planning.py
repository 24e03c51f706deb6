import numpy as np
import pytest

from core.autodiff.rng import make_rng
from core.envs import ActionSpace, make_env
from core.errors import ParameterError
from core.planning import CemParams, CemPlanner, plan, rollout_score, score_batch


def test_params_validation():
    space = ActionSpace("categorical", 4)
    with pytest.raises(ParameterError):
        CemParams(0, 8, 4, 1, space)
    with pytest.raises(ParameterError):
        CemParams(1, 4, 8, 1, space)
    with pytest.raises(ParameterError):
        CemParams(1, 4, 2, 0, space)


def test_empty_sequence_scores_zero(chem_env, rng):
    s, goal = chem_env.initial_state(rng)
    assert rollout_score(chem_env.oracle_dynamics(), chem_env, s, [], goal) == 0.0


def test_score_batch_matches_single_rollouts(chem_env, rng):
    truth = chem_env.oracle_dynamics()
    s, goal = chem_env.initial_state(rng)
    seqs = rng.integers(chem_env.action_space.size, size=(6, 3))
    vectors = np.eye(chem_env.action_space.size)[seqs]
    batch = score_batch(truth, chem_env, s, vectors, goal)
    singles = [rollout_score(truth, chem_env, s, list(row), goal) for row in seqs]
    np.testing.assert_allclose(batch, singles)


def test_cem_with_true_dynamics_finds_best_one_step_action(chem_env):
    rng = make_rng(21)
    truth = chem_env.oracle_dynamics()
    params = CemParams(1, 200, 20, 2, chem_env.action_space)
    for _ in range(5):
        s, goal = chem_env.initial_state(rng)
        rewards = [chem_env.reward(chem_env.transition(s, a), goal) for a in range(chem_env.action_space.size)]
        action = plan(truth, chem_env, s, goal, params, rng)
        assert isinstance(action, int)
        assert chem_env.reward(chem_env.transition(s, action), goal) == pytest.approx(max(rewards))


def test_best_score_never_decreases(chem_env):
    rng = make_rng(5)
    planner = CemPlanner(chem_env.oracle_dynamics(), chem_env, CemParams(3, 16, 4, 4, chem_env.action_space), rng)
    s, goal = chem_env.initial_state(rng)
    planner.plan(s, goal)
    scores = planner.last_best_scores
    assert len(scores) == 4
    assert all(b >= a for a, b in zip(scores, scores[1:]))


def test_continuous_plan_stays_in_bounds(magnetic_cfg):
    env = make_env(magnetic_cfg)
    rng = make_rng(6)
    params = CemParams.from_config(magnetic_cfg, env)
    s, goal = env.initial_state(rng)
    action = plan(env.oracle_dynamics(), env, s, goal, params, rng)
    assert action.shape == (3,)
    assert np.all(np.abs(action) <= env.action_space.high)


def test_same_rng_same_plan(chem_env):
    truth = chem_env.oracle_dynamics()
    params = CemParams(2, 16, 4, 3, chem_env.action_space)
    s, goal = chem_env.initial_state(make_rng(1))
    a = plan(truth, chem_env, s, goal, params, make_rng(9))
    b = plan(truth, chem_env, s, goal, params, make_rng(9))
    assert a == b
