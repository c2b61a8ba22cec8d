"""Trajectory data model and the line-delimited dataset format.

File layout: the first line is a JSON header::

    {"format_version": 1, "state_dim": 4, "action_dim": 2,
     "n_trajectories": 2000, "meta": {...}}

followed by one JSON record per trajectory with keys ``id``, ``states``,
``actions``, ``next_states``, ``rewards`` and ``costs``.  Floats are written
with ``repr`` precision so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

FORMAT_VERSION = 1
_ARRAY_FIELDS = ("states", "actions", "next_states", "rewards", "costs")


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    id: int
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        for name in _ARRAY_FIELDS:
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.id < 0:
            raise ValueError(f"trajectory id must be >= 0, got {self.id}")
        k = len(self.rewards)
        if k < 1:
            raise ValueError(f"trajectory {self.id}: empty")
        if self.states.ndim != 2 or self.actions.ndim != 2 or self.next_states.shape != self.states.shape:
            raise ValueError(f"trajectory {self.id}: states/actions must be 2-D with matching next_states")
        if self.rewards.ndim != 1 or self.costs.ndim != 1:
            raise ValueError(f"trajectory {self.id}: rewards and costs must be 1-D")
        if not (len(self.states) == len(self.actions) == len(self.costs) == k):
            raise ValueError(f"trajectory {self.id}: per-step arrays have different lengths")
        for name in _ARRAY_FIELDS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"trajectory {self.id}: non-finite values in {name}")
        if np.any(self.costs < 0):
            raise ValueError(f"trajectory {self.id}: negative cost")

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def action_dim(self) -> int:
        return self.actions.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.id == other.id and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in _ARRAY_FIELDS
        )


@dataclass(frozen=True)
class Dataset:
    trajectories: list[Trajectory]
    state_dim: int
    action_dim: int
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "trajectories", list(self.trajectories))
        if not self.trajectories:
            raise ValueError("empty dataset")
        seen = set()
        for tau in self.trajectories:
            if tau.state_dim != self.state_dim or tau.action_dim != self.action_dim:
                raise ValueError(
                    f"trajectory {tau.id}: dimension mismatch (state {tau.state_dim} vs {self.state_dim}, "
                    f"action {tau.action_dim} vs {self.action_dim})"
                )
            if tau.id in seen:
                raise ValueError(f"duplicate trajectory id {tau.id}")
            seen.add(tau.id)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def by_id(self) -> dict[int, Trajectory]:
        return {tau.id: tau for tau in self.trajectories}

    def subset(self, ids) -> "Dataset":
        keep = set(ids)
        return Dataset([t for t in self.trajectories if t.id in keep], self.state_dim, self.action_dim, dict(self.meta))


def trajectory_return(tau: Trajectory) -> float:
    """Undiscounted sum of rewards."""
    return math.fsum(tau.rewards)


def trajectory_cost(tau: Trajectory) -> float:
    """Undiscounted sum of costs."""
    return math.fsum(tau.costs)


@dataclass(frozen=True)
class DatasetStats:
    v_min: float
    v_max: float
    n_traj: int
    table: list[tuple[int, float, float]]  # (id, return, cost)


def dataset_stats(data: Dataset) -> DatasetStats:
    if len(data) == 0:
        raise ValueError("empty dataset")
    table = [(t.id, trajectory_return(t), trajectory_cost(t)) for t in data]
    returns = [row[1] for row in table]
    return DatasetStats(min(returns), max(returns), len(table), table)


def _float_list(arr: np.ndarray):
    return arr.tolist()


def write_dataset(data: Dataset, path) -> None:
    """Write ``data`` atomically (temp file + rename)."""
    header = {
        "format_version": FORMAT_VERSION,
        "state_dim": data.state_dim,
        "action_dim": data.action_dim,
        "n_trajectories": len(data),
        "meta": data.meta,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for tau in data:
            rec = {"id": tau.id}
            rec.update({name: _float_list(getattr(tau, name)) for name in _ARRAY_FIELDS})
            fh.write(json.dumps(rec, allow_nan=False) + "\n")
    os.replace(tmp, path)


def read_dataset(path) -> Dataset:
    """Parse a dataset file; any defect raises ``DatasetFormatError`` and nothing is returned."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file, missing header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: line 1 (header): {exc}") from None
    for key in ("format_version", "state_dim", "action_dim", "n_trajectories"):
        if key not in header:
            raise DatasetFormatError(f"{path}: header missing '{key}'")
    if header["format_version"] != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}: unsupported format_version {header['format_version']}")

    trajectories = []
    for lineno, line in enumerate(lines[1:], start=2):
        where = f"{path}: line {lineno} (record {lineno - 2})"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{where}: {exc}") from None
        missing = [k for k in ("id",) + _ARRAY_FIELDS if k not in rec]
        if missing:
            raise DatasetFormatError(f"{where}: missing field(s) {', '.join(missing)}")
        try:
            trajectories.append(Trajectory(rec["id"], *(rec[k] for k in _ARRAY_FIELDS)))
        except (ValueError, TypeError) as exc:
            raise DatasetFormatError(f"{where}: {exc}") from None
    if len(trajectories) != header["n_trajectories"]:
        raise DatasetFormatError(
            f"{path}: truncated, header promises {header['n_trajectories']} records, found {len(trajectories)}"
        )
    try:
        return Dataset(trajectories, header["state_dim"], header["action_dim"], header.get("meta", {}))
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None
