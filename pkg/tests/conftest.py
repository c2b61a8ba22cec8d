import numpy as np
import pytest

from trac.trajectory_store import Dataset, Trajectory


def make_trajectory(traj_id, rewards, costs=None, state_dim=3, action_dim=2, seed=None):
    rng = np.random.default_rng(traj_id if seed is None else seed)
    k = len(rewards)
    costs = np.zeros(k) if costs is None else costs
    states = rng.standard_normal((k, state_dim))
    next_states = rng.standard_normal((k, state_dim))
    actions = rng.uniform(-1, 1, (k, action_dim))
    return Trajectory(traj_id, states, actions, next_states, rewards, costs)


def random_dataset(rng, n, k_range=(1, 12), cost_scale=3.0, state_dim=3, action_dim=2):
    trajs = []
    for i in range(n):
        k = int(rng.integers(*k_range))
        rewards = rng.normal(size=k)
        costs = rng.exponential(cost_scale, size=k) * (rng.random(k) < 0.5)
        trajs.append(make_trajectory(i, rewards, costs, state_dim, action_dim, seed=int(rng.integers(1 << 30))))
    return Dataset(trajs, state_dim, action_dim, {"env": "synthetic"})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
