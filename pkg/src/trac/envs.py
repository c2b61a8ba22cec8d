"""Desk-scale constrained MDPs and a behavioral data generator.

``PointHazardEnv`` is a 2-D point mass that has to travel from the lower-left
corner to a goal in the upper-right corner.  A circular hazard sits on the
straight line between the two, so the fastest route accrues cost.

``ChainCMDP`` is a tiny discrete chain with a known optimal safe policy, used
for brute-force oracle tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from trac.trajectory_store import Dataset, Trajectory

GOAL = np.array([0.8, 0.8])
HAZARD_CENTER = np.array([0.3, 0.3])
HAZARD_RADIUS = 0.25
START = np.array([-0.8, -0.8])
POS_LIMIT = 1.0
VEL_LIMIT = 0.2
ACT_LIMIT = 1.0
HORIZON = 64

DEFAULT_COST_THRESHOLD = 8.0


def dynamics(state: np.ndarray, action: np.ndarray):
    """Vectorized transition of the point mass.

    ``state`` has shape ``(..., 4)`` and ``action`` shape ``(..., 2)``.
    Returns ``(next_state, reward, cost)``.
    """
    state = np.asarray(state, dtype=np.float64)
    action = np.clip(np.asarray(action, dtype=np.float64), -ACT_LIMIT, ACT_LIMIT)
    pos, vel = state[..., :2], state[..., 2:]
    vel_next = np.clip(0.9 * vel + 0.1 * action, -VEL_LIMIT, VEL_LIMIT)
    pos_next = np.clip(pos + vel_next, -POS_LIMIT, POS_LIMIT)
    reward = np.linalg.norm(pos - GOAL, axis=-1) - np.linalg.norm(pos_next - GOAL, axis=-1)
    # strict inequality: the boundary itself is safe
    cost = (np.linalg.norm(pos_next - HAZARD_CENTER, axis=-1) < HAZARD_RADIUS).astype(np.float64)
    return np.concatenate([pos_next, vel_next], axis=-1), reward, cost


class PointHazardEnv:
    """Point mass with a hazard disc between start and goal."""

    name = "PointHazard"
    state_dim = 4
    action_dim = 2
    horizon = HORIZON
    action_low = -ACT_LIMIT
    action_high = ACT_LIMIT

    def __init__(self):
        self._state = None
        self._t = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        # seed reserved for stochastic starts; the start state is fixed
        self._t = 0
        self._state = np.concatenate([START, np.zeros(2)])
        return self._state.copy()

    def step(self, action):
        if self._state is None:
            raise RuntimeError("call reset() before step()")
        state, reward, cost = dynamics(self._state, action)
        self._state = state
        self._t += 1
        return state.copy(), float(reward), float(cost), self._t >= self.horizon


@dataclass
class GeneratorConfig:
    n_trajectories: int = 2000
    # negative gains pull toward the hazard; the mix keeps roughly half the episodes unsafe at l = 8
    avoidance_gains: tuple[float, ...] = (-8.0, -2.0, 0.0, 1.0)
    noise_scales: tuple[float, ...] = (0.05, 0.2)
    seed: int = 0

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not self.avoidance_gains or not self.noise_scales:
            raise ValueError("avoidance_gains and noise_scales must be nonempty")


def behavioral_action(pos: np.ndarray, gain, noise) -> np.ndarray:
    """Goal-seeking controller with a hazard repulsion term, vectorized over rows."""
    diff = pos - HAZARD_CENTER
    dist = np.maximum(np.linalg.norm(diff, axis=-1, keepdims=True), 0.05)
    repulsion = 0.1 * diff / dist**2
    gain = np.asarray(gain, dtype=np.float64)[..., None]
    return np.clip(1.0 * (GOAL - pos) + gain * repulsion + noise, -ACT_LIMIT, ACT_LIMIT)


def generate_dataset(env: PointHazardEnv, gcfg: GeneratorConfig) -> Dataset:
    """Roll the behavioral controller for ``gcfg.n_trajectories`` episodes.

    Each episode draws its own (gain, noise) pair and noise sequence from a
    seed derived from ``gcfg.seed`` and the episode index, so the result does
    not depend on how episodes are batched.
    """
    n, horizon = gcfg.n_trajectories, env.horizon
    gains = np.empty(n)
    noise = np.empty((n, horizon, 2))
    for i, child in enumerate(np.random.SeedSequence(gcfg.seed).spawn(n)):
        rng = np.random.default_rng(child)
        gains[i] = gcfg.avoidance_gains[rng.integers(len(gcfg.avoidance_gains))]
        sigma = gcfg.noise_scales[rng.integers(len(gcfg.noise_scales))]
        noise[i] = sigma * rng.standard_normal((horizon, 2))

    states = np.empty((n, horizon, 4))
    actions = np.empty((n, horizon, 2))
    next_states = np.empty((n, horizon, 4))
    rewards = np.empty((n, horizon))
    costs = np.empty((n, horizon))
    state = np.tile(env.reset(), (n, 1))
    for t in range(horizon):
        action = behavioral_action(state[:, :2], gains, noise[:, t])
        nxt, r, c = dynamics(state, action)
        states[:, t], actions[:, t], next_states[:, t] = state, action, nxt
        rewards[:, t], costs[:, t] = r, c
        state = nxt

    trajectories = [
        Trajectory(i, states[i], actions[i], next_states[i], rewards[i], costs[i]) for i in range(n)
    ]
    meta = {
        "env": env.name,
        "generator_seed": gcfg.seed,
        "avoidance_gains": ",".join(repr(float(g)) for g in gcfg.avoidance_gains),
        "noise_scales": ",".join(repr(float(s)) for s in gcfg.noise_scales),
    }
    return Dataset(trajectories, env.state_dim, env.action_dim, meta)


@dataclass
class ChainCMDP:
    """Deterministic 5-state chain.

    The agent starts in state 0 and advances one state per step for four
    steps.  Action ``0`` walks (reward 1, cost 0) and action ``1`` runs
    (reward 2, cost 1).  States are one-hot encoded, actions are 1-vectors.
    """

    n_states: int = 5
    walk_reward: float = 1.0
    run_reward: float = 2.0
    run_cost: float = 1.0
    name: str = field(default="Chain", init=False)

    @property
    def horizon(self) -> int:
        return self.n_states - 1

    def _onehot(self, i: int) -> np.ndarray:
        x = np.zeros(self.n_states)
        x[i] = 1.0
        return x

    def rollout(self, plan, traj_id: int = 0) -> Trajectory:
        states, actions, next_states, rewards, costs = [], [], [], [], []
        for t, a in enumerate(plan):
            states.append(self._onehot(t))
            next_states.append(self._onehot(t + 1))
            actions.append([float(a)])
            rewards.append(self.run_reward if a else self.walk_reward)
            costs.append(self.run_cost if a else 0.0)
        return Trajectory(traj_id, states, actions, next_states, rewards, costs)

    def enumerate_dataset(self) -> Dataset:
        """Every open-loop plan exactly once, ids in lexicographic plan order."""
        plans = itertools.product((0, 1), repeat=self.horizon)
        trajs = [self.rollout(p, i) for i, p in enumerate(plans)]
        return Dataset(trajs, self.n_states, 1, {"env": self.name})

    def optimal_safe_return(self, threshold: float) -> float:
        n_run = min(self.horizon, int(np.floor(threshold / self.run_cost)))
        return n_run * self.run_reward + (self.horizon - n_run) * self.walk_reward
