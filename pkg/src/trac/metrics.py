"""Normalized reward/cost and rollout evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from trac.policy import Policy, act

DEFAULT_EPSILON = 1e-6


def normalized_reward(ret: float, r_min: float, r_max: float) -> float:
    if r_max == r_min:
        raise ValueError("degenerate normalization: r_max == r_min")
    return (ret - r_min) / (r_max - r_min)


def normalized_cost(cost: float, kappa: float, eps: float = DEFAULT_EPSILON) -> float:
    if kappa < 0:
        raise ValueError("cost threshold kappa must be >= 0")
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return (cost + eps) / (kappa + eps)


@dataclass
class EvalReport:
    episodes: int
    mean_return: float
    mean_cost: float
    normalized_reward: float
    normalized_cost: float
    r_min: float
    r_max: float
    kappa: float
    eps: float = DEFAULT_EPSILON
    episode_returns: list[float] = field(default_factory=list)
    episode_costs: list[float] = field(default_factory=list)

    @property
    def safe(self) -> bool:
        return self.normalized_cost <= 1.0

    def row(self, **extra) -> dict:
        out = dict(extra)
        out.update(
            episodes=self.episodes,
            mean_return=repr(self.mean_return),
            mean_cost=repr(self.mean_cost),
            normalized_reward=repr(self.normalized_reward),
            normalized_cost=repr(self.normalized_cost),
            safe=int(self.safe),
            r_min=repr(self.r_min),
            r_max=repr(self.r_max),
            kappa=repr(self.kappa),
        )
        return out

    def write_csv(self, path, header_lines=()) -> None:
        """Per-episode rows followed by an ``all`` aggregate row."""
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", "return", "cost", "normalized_reward", "normalized_cost", "safe"])
            for i, (r, c) in enumerate(zip(self.episode_returns, self.episode_costs)):
                nc = normalized_cost(c, self.kappa, self.eps)
                w.writerow([i, repr(r), repr(c), repr(normalized_reward(r, self.r_min, self.r_max)), repr(nc),
                            int(nc <= 1.0)])
            w.writerow(["all", repr(self.mean_return), repr(self.mean_cost), repr(self.normalized_reward),
                        repr(self.normalized_cost), int(self.safe)])

    def summary(self) -> str:
        verdict = "SAFE" if self.safe else "UNSAFE"
        return (f"{self.episodes} episodes: return {self.mean_return:.4f} cost {self.mean_cost:.2f} | "
                f"normalized reward {self.normalized_reward:.3f} cost {self.normalized_cost:.3f} [{verdict}]")


def rollout(policy: Policy, env, seed: int, sigma: float = 0.0):
    """One episode; returns ``(return, cost)``.  ``sigma=0`` rolls the mean action."""
    rng = np.random.default_rng(seed)
    state = env.reset(seed)
    ret = cost = 0.0
    done = False
    while not done:
        a = act(policy, state, sigma, rng, env.action_low, env.action_high)
        state, r, c, done = env.step(a)
        ret += r
        cost += c
    return ret, cost


def evaluate_policy(policy: Policy, env, n_episodes: int, kappa: float, r_min: float, r_max: float, seed: int = 0,
                    eps: float = DEFAULT_EPSILON) -> EvalReport:
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    seeds = np.random.SeedSequence(seed).generate_state(n_episodes)
    returns, costs = [], []
    for s in seeds:
        r, c = rollout(policy, env, int(s))
        returns.append(r)
        costs.append(c)
    mean_r, mean_c = float(np.mean(returns)), float(np.mean(costs))
    return EvalReport(n_episodes, mean_r, mean_c, normalized_reward(mean_r, r_min, r_max),
                      normalized_cost(mean_c, kappa, eps), r_min, r_max, kappa, eps, returns, costs)
