import numpy as np


def random_batch(env, rng, size=12):
    """(states, action vectors, next states) from random resets and actions."""
    states, actions, nexts = [], [], []
    for _ in range(size):
        s, _ = env.initial_state(rng)
        a = env.sample_action(rng)
        states.append(s)
        actions.append(env.action_vector(a))
        nexts.append(env.transition(s, a))
    return np.stack(states), np.stack(actions), np.stack(nexts)
