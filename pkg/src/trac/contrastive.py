"""Desirable / undesirable partitioning of an offline dataset.

Safe trajectories (total cost within the threshold) are ranked by return; the
top ``x_pct`` become desirable, the bottom ``y_pct`` join every unsafe
trajectory in the undesirable set.  Weights and the class-balancing
coefficients are computed here as well.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from trac.trajectory_store import Dataset, dataset_stats, trajectory_cost, trajectory_return

SAFE_TOP = "safe_top"
SAFE_BOTTOM = "safe_bottom"
UNSAFE = "unsafe"


class ContrastiveError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledTrajectory:
    traj_id: int
    label: int
    weight: float
    origin: str
    ret: float
    cost: float


@dataclass(frozen=True)
class ContrastiveDataset:
    members: tuple[LabeledTrajectory, ...]
    lambda_d: float
    lambda_u: float
    n_d: int
    n_u: int
    v_min: float
    v_max: float
    cost_threshold: float
    delta: float
    eta: float

    @property
    def desirable(self):
        return [m for m in self.members if m.label == 1]

    @property
    def undesirable(self):
        return [m for m in self.members if m.label == 0]

    def restrict(self, labels) -> "ContrastiveDataset":
        """Members with the given labels only; lambdas and counts are kept as-is.

        Used by the single-class ablations, where one term of the loss is
        switched off by emptying its data rather than by changing lambda.
        """
        labels = set(labels)
        kept = tuple(m for m in self.members if m.label in labels)
        if not kept:
            raise ContrastiveError("restriction leaves no members")
        return ContrastiveDataset(kept, self.lambda_d, self.lambda_u, self.n_d, self.n_u, self.v_min,
                                  self.v_max, self.cost_threshold, self.delta, self.eta)


def split_by_cost(data: Dataset, threshold: float):
    """Returns ``(safe_ids, unsafe_ids)``; the boundary ``cost == threshold`` is safe."""
    if threshold < 0:
        raise ValueError("cost threshold must be >= 0")
    safe, unsafe = set(), set()
    for tau in data:
        (safe if trajectory_cost(tau) <= threshold else unsafe).add(tau.id)
    return safe, unsafe


def rank_by_return(ids, returns: dict[int, float]) -> list[int]:
    """Return descending, ties broken by ascending id."""
    return sorted(ids, key=lambda i: (-returns[i], i))


def selection_count(pct: float, n: int) -> int:
    if pct <= 0 or n == 0:
        return 0
    # tolerate float noise in products such as 0.07 * 100
    return min(n, max(1, math.ceil(round(pct / 100.0 * n, 9))))


def select_contrastive(ranked_safe: list[int], x_pct: float, y_pct: float, unsafe_ids):
    """Top ``x_pct`` of ``ranked_safe`` are desirable; bottom ``y_pct`` plus all unsafe are undesirable."""
    if not 0 < x_pct <= 100:
        raise ContrastiveError(f"x_pct must be in (0, 100], got {x_pct}")
    if not 0 <= y_pct <= 100:
        raise ContrastiveError(f"y_pct must be in [0, 100], got {y_pct}")
    if x_pct + y_pct > 100:
        raise ContrastiveError(f"x_pct + y_pct must not exceed 100, got {x_pct + y_pct}")
    n_safe = len(ranked_safe)
    if n_safe == 0:
        raise ContrastiveError("no desirable candidates")
    n_top = selection_count(x_pct, n_safe)
    n_bottom = min(selection_count(y_pct, n_safe), n_safe - n_top)
    desirable = list(ranked_safe[:n_top])
    bottom = list(ranked_safe[n_safe - n_bottom :]) if n_bottom else []
    undesirable = bottom + sorted(unsafe_ids)
    if not undesirable:
        raise ContrastiveError("no undesirable trajectories; training needs both classes")
    return desirable, undesirable


def _fraction(v: float, v_min: float, v_max: float):
    if v_max == v_min:
        return None
    return (v - v_min) / (v_max - v_min)


def weight_desirable(v: float, v_min: float, v_max: float, delta: float) -> float:
    frac = _fraction(v, v_min, v_max)
    if frac is None:
        frac = 1.0
    return frac * (1.0 - delta) + delta


def weight_undesirable_safe(v: float, v_min: float, v_max: float, delta: float) -> float:
    frac = _fraction(v, v_min, v_max)
    if frac is None:
        frac = 0.0
    return (1.0 - frac) * (1.0 - delta) + delta


def weight_unsafe() -> float:
    return 1.0


def compute_lambdas(n_d: int, n_u: int, eta: float):
    """Solve ``lambda_d + lambda_u = 1`` and ``lambda_d n_d / (lambda_u n_u) = eta``."""
    if n_d < 1 or n_u < 1:
        raise ContrastiveError(f"both classes need members (n_d={n_d}, n_u={n_u})")
    if not eta > 0:
        raise ContrastiveError(f"eta must be > 0, got {eta}")
    denom = n_d + eta * n_u
    # both from the closed form; 1 - lambda_d loses the ratio when lambda_d is near 1
    return eta * n_u / denom, n_d / denom


def _check_delta(delta):
    # delta = 1 is accepted: every weight collapses to 1
    if not 0.0 <= delta <= 1.0:
        raise ContrastiveError(f"delta must be in [0, 1], got {delta}")


def build(data: Dataset, threshold: float, x_pct: float, y_pct: float, delta: float, eta: float) -> ContrastiveDataset:
    _check_delta(delta)
    stats = dataset_stats(data)
    returns = {i: r for i, r, _ in stats.table}
    costs = {i: c for i, _, c in stats.table}
    safe, unsafe = split_by_cost(data, threshold)
    desirable, undesirable = select_contrastive(rank_by_return(safe, returns), x_pct, y_pct, unsafe)

    members = []
    for i in desirable:
        w = weight_desirable(returns[i], stats.v_min, stats.v_max, delta)
        members.append(LabeledTrajectory(i, 1, w, SAFE_TOP, returns[i], costs[i]))
    for i in undesirable:
        if i in unsafe:
            members.append(LabeledTrajectory(i, 0, weight_unsafe(), UNSAFE, returns[i], costs[i]))
        else:
            w = weight_undesirable_safe(returns[i], stats.v_min, stats.v_max, delta)
            members.append(LabeledTrajectory(i, 0, w, SAFE_BOTTOM, returns[i], costs[i]))
    lambda_d, lambda_u = compute_lambdas(len(desirable), len(undesirable), eta)
    return ContrastiveDataset(tuple(members), lambda_d, lambda_u, len(desirable), len(undesirable),
                              stats.v_min, stats.v_max, threshold, delta, eta)


def write_partition_report(data: Dataset, cd: ContrastiveDataset, path, header_lines=()) -> None:
    """CSV with one row per trajectory; unselected safe trajectories get label and weight left blank."""
    labeled = {m.traj_id: m for m in cd.members}
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["traj_id", "return", "cost", "label", "weight", "origin"])
        for tau in data:
            m = labeled.get(tau.id)
            if m is None:
                w.writerow([tau.id, repr(trajectory_return(tau)), repr(trajectory_cost(tau)), "", "", "safe_unused"])
            else:
                w.writerow([tau.id, repr(m.ret), repr(m.cost), m.label, repr(m.weight), m.origin])
