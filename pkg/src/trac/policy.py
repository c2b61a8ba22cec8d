"""Fixed-variance Gaussian policies and the discounted log-ratio trajectory score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trac import neuralnet as nn
from trac.trajectory_store import Trajectory

LEARNER = "learner"
REFERENCE = "reference"


@dataclass
class Policy:
    spec: nn.MlpSpec
    params: np.ndarray
    role: str = LEARNER

    def mean(self, states, rng=None) -> np.ndarray:
        return nn.forward(self.spec, self.params, states, rng)[0]

    def copy(self, role: str | None = None) -> "Policy":
        return Policy(self.spec, self.params.copy(), role or self.role)

    @property
    def state_dim(self) -> int:
        return self.spec.layer_sizes[0]

    @property
    def action_dim(self) -> int:
        return self.spec.layer_sizes[-1]


def make_policy(state_dim: int, action_dim: int, hidden=(256, 256), dropout_rate=0.25, seed=0, role=LEARNER) -> Policy:
    spec = nn.MlpSpec((state_dim, *hidden, action_dim), dropout_rate)
    return Policy(spec, nn.init_params(spec, seed), role)


@dataclass(frozen=True)
class Segment:
    """Contiguous slice ``[start, start + m)`` of a trajectory."""

    traj_id: int
    start: int
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        if len(self.states) < 1 or len(self.states) != len(self.actions):
            raise ValueError("segment needs m >= 1 aligned (state, action) pairs")

    def __len__(self) -> int:
        return len(self.states)

    @classmethod
    def of(cls, tau: Trajectory, start: int = 0, length: int | None = None) -> "Segment":
        stop = len(tau) if length is None else start + length
        if not 0 <= start < stop <= len(tau):
            raise ValueError(f"segment [{start}, {stop}) outside trajectory {tau.id} of length {len(tau)}")
        return cls(tau.id, start, tau.states[start:stop], tau.actions[start:stop])


def log_prob_from_mean(mean: np.ndarray, actions: np.ndarray) -> np.ndarray:
    diff = mean - actions
    return -np.sum(diff * diff, axis=-1)


def log_prob(policy: Policy, s, a):
    """Surrogate ``log pi(a|s) = -||mu(s) - a||^2``; vectorized over rows."""
    a = np.asarray(a, dtype=np.float64)
    mu = policy.mean(s)
    if mu.shape != a.shape:
        raise ValueError(f"action shape {a.shape} does not match policy output {mu.shape}")
    return log_prob_from_mean(mu, a)


def act(policy: Policy, s, sigma: float = 0.0, rng: np.random.Generator | None = None, low=-1.0, high=1.0):
    """Mean action, or mean plus N(0, sigma^2) noise clipped to ``[low, high]``."""
    mu = policy.mean(s)
    if sigma == 0.0:
        return mu
    if rng is None:
        raise ValueError("gaussian mode needs an rng")
    return np.clip(mu + sigma * rng.standard_normal(mu.shape), low, high)


def discounts(m: int, gamma: float) -> np.ndarray:
    return gamma ** np.arange(m, dtype=np.float64)


def segment_score(pi_theta: Policy, pi_ref: Policy | None, seg: Segment, alpha: float, gamma: float) -> float:
    """``sum_t gamma^t * alpha * (log pi_theta(a_t|s_t) - log pi_ref(a_t|s_t))``, t from 0 at the segment start.

    ``pi_ref=None`` stands for a uniform reference whose log-probability is the constant 0.
    """
    ratio = log_prob(pi_theta, seg.states, seg.actions)
    if pi_ref is not None:
        ratio = ratio - log_prob(pi_ref, seg.states, seg.actions)
    return float(alpha * np.dot(discounts(len(seg), gamma), ratio))
