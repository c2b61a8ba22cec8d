"""Behavior-cloning pretraining and contrastive trajectory classification training."""

from __future__ import annotations

import csv
import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from trac import neuralnet as nn
from trac.contrastive import ContrastiveDataset
from trac.policy import Policy, Segment, discounts, log_prob, log_prob_from_mean
from trac.trajectory_store import Dataset, Trajectory

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    pretrain_steps: int = 30_000
    train_steps: int = 100_000
    batch_size: int = 96
    lr: float = 1e-4
    alpha: float = 0.2
    gamma: float = 0.99
    segment_ratio: float = 1.0
    delta: float = 0.7
    eta: float = 0.25
    x_pct: float = 50.0
    y_pct: float = 0.0
    cost_threshold: float = 8.0
    seed: int = 0
    dropout_rate: float = 0.25
    hidden_sizes: tuple[int, ...] = (256, 256)
    log_interval: int = 100

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        checks = [
            (self.pretrain_steps >= 0, "pretrain_steps >= 0"),
            (self.train_steps >= 0, "train_steps >= 0"),
            (self.batch_size >= 1, "batch_size >= 1"),
            (self.lr > 0, "lr > 0"),
            (self.alpha > 0, "alpha > 0"),
            (0 < self.gamma <= 1, "0 < gamma <= 1"),
            (0 < self.segment_ratio <= 1, "0 < segment_ratio <= 1"),
            (0 <= self.delta <= 1, "0 <= delta <= 1"),
            (self.eta > 0, "eta > 0"),
            (0 < self.x_pct <= 100, "0 < x_pct <= 100"),
            (0 <= self.y_pct <= 100, "0 <= y_pct <= 100"),
            (self.x_pct + self.y_pct <= 100, "x_pct + y_pct <= 100"),
            (self.cost_threshold >= 0, "cost_threshold >= 0"),
            (0 <= self.dropout_rate < 1, "0 <= dropout_rate < 1"),
            (all(h >= 1 for h in self.hidden_sizes), "hidden_sizes positive"),
            (self.log_interval >= 1, "log_interval >= 1"),
        ]
        for ok, rule in checks:
            if not ok:
                raise ValueError(f"invalid training config: requires {rule}")

    def mlp_spec(self, state_dim: int, action_dim: int) -> nn.MlpSpec:
        return nn.MlpSpec((state_dim, *self.hidden_sizes, action_dim), self.dropout_rate)


def _streams(seed: int, purpose: str):
    """Independent generators per purpose so that e.g. dropout never perturbs batch sampling."""
    ss = np.random.SeedSequence([seed, zlib.crc32(purpose.encode())])
    init, sample, dropout = ss.spawn(3)
    return (int(init.generate_state(1)[0]), np.random.default_rng(sample), np.random.default_rng(dropout))


def pretrain_bc(data: Dataset, cfg: TrainConfig, seed: int | None = None, purpose: str = "bc",
                role: str = "reference") -> Policy:
    """Regress actions on states over uniformly drawn transitions of ``data``."""
    seed = cfg.seed if seed is None else seed
    init_seed, sample_rng, drop_rng = _streams(seed, purpose)
    spec = cfg.mlp_spec(data.state_dim, data.action_dim)
    params = nn.init_params(spec, init_seed)
    states = np.concatenate([t.states for t in data])
    actions = np.concatenate([t.actions for t in data])
    adam = nn.AdamState.zeros(spec.n_params)
    for step in range(cfg.pretrain_steps):
        idx = sample_rng.integers(len(states), size=cfg.batch_size)
        mu, cache = nn.forward(spec, params, states[idx], drop_rng)
        resid = mu - actions[idx]
        loss = float(np.mean(np.sum(resid * resid, axis=1)))
        if not math.isfinite(loss):
            raise TrainingError(f"behavior cloning diverged at step {step}: loss={loss}")
        grads = nn.backward(spec, params, cache, 2.0 * resid / len(idx))
        params, adam = nn.adam_step(params, grads, adam, cfg.lr)
        if (step + 1) % 5000 == 0:
            log.debug("bc step %d loss %.6f", step + 1, loss)
    return Policy(spec, params, role)


def bc_mse(policy: Policy, data: Dataset) -> float:
    states = np.concatenate([t.states for t in data])
    actions = np.concatenate([t.actions for t in data])
    return float(-np.mean(log_prob(policy, states, actions)))


def segment_length(k: int, ratio: float) -> int:
    return min(k, max(1, math.ceil(round(ratio * k, 9))))


def sample_segment(tau: Trajectory, ratio: float, rng: np.random.Generator) -> Segment:
    """Uniformly placed window of ``ceil(ratio * k)`` steps."""
    if not 0 < ratio <= 1:
        raise ValueError(f"segment ratio must be in (0, 1], got {ratio}")
    k = len(tau)
    m = segment_length(k, ratio)
    start = int(rng.integers(0, k - m + 1))
    return Segment.of(tau, start, m)


class LossOutput(NamedTuple):
    loss: float
    grads: np.ndarray
    psi: np.ndarray


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def trac_loss(batch: Sequence, pi_theta: Policy, pi_ref: Policy | None, lambda_d: float, lambda_u: float,
              alpha: float, gamma: float, rng: np.random.Generator | None = None,
              ref_log_probs: Sequence[np.ndarray] | None = None) -> LossOutput:
    """Weighted binary cross-entropy of sigmoid(psi) against desirability labels.

    ``batch`` holds ``(segment, label, weight)`` triples.  The reference log
    probabilities come from ``ref_log_probs`` when given (one array per
    member), otherwise from ``pi_ref``; ``pi_ref=None`` means a constant 0.
    ``rng`` enables dropout on the learner only.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    segs = [b[0] for b in batch]
    labels = np.array([b[1] for b in batch], dtype=np.float64)
    weights = np.array([b[2] for b in batch], dtype=np.float64)
    lengths = np.array([len(s) for s in segs])
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    states = np.concatenate([s.states for s in segs])
    actions = np.concatenate([s.actions for s in segs])

    mu, cache = nn.forward(pi_theta.spec, pi_theta.params, states, rng)
    lp = log_prob_from_mean(mu, actions)
    if ref_log_probs is not None:
        lp_ref = np.concatenate(ref_log_probs)
    elif pi_ref is not None:
        lp_ref = log_prob(pi_ref, states, actions)
    else:
        lp_ref = np.zeros_like(lp)
    disc = np.concatenate([discounts(m, gamma) for m in lengths])
    psi = alpha * np.add.reduceat(disc * (lp - lp_ref), offsets)

    pos = lambda_d * weights * labels
    neg = lambda_u * weights * (1.0 - labels)
    # log sigmoid(psi) = -softplus(-psi); log(1 - sigmoid(psi)) = -softplus(psi)
    per_member = pos * _softplus(-psi) + neg * _softplus(psi)
    dpsi = (-pos * _sigmoid(-psi) + neg * _sigmoid(psi)) / len(batch)
    bad = ~(np.isfinite(per_member) & np.isfinite(dpsi))
    if bad.any():
        j = int(np.argmax(bad))
        raise TrainingError(f"non-finite loss for member traj_id={segs[j].traj_id} (psi={psi[j]})")
    loss = float(np.mean(per_member))

    row_coef = alpha * disc * np.repeat(dpsi, lengths)
    grad_out = row_coef[:, None] * (-2.0) * (mu - actions)
    grads = nn.backward(pi_theta.spec, pi_theta.params, cache, grad_out)
    if not np.all(np.isfinite(grads)):
        row_bad = ~np.all(np.isfinite(grad_out), axis=1)
        j = int(np.searchsorted(offsets, int(np.argmax(row_bad)), side="right") - 1) if row_bad.any() else 0
        raise TrainingError(f"non-finite gradient, first suspect member traj_id={segs[j].traj_id}")
    return LossOutput(loss, grads, psi)


@dataclass
class TrainLog:
    records: list[tuple[int, float, float, float, float]] = field(default_factory=list)

    columns = ("step", "loss", "mean_psi_desirable", "mean_psi_undesirable", "grad_norm")

    def append(self, step, loss, psi_d, psi_u, grad_norm):
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at step {step}")
        self.records.append((int(step), float(loss), float(psi_d), float(psi_u), float(grad_norm)))

    def losses(self) -> np.ndarray:
        return np.array([r[1] for r in self.records])

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for rec in self.records:
                w.writerow([rec[0], *(repr(x) for x in rec[1:])])


def _masked_mean(values, mask) -> float:
    return float(np.mean(values[mask])) if mask.any() else float("nan")


def train(cd: ContrastiveDataset, data: Dataset, pi_ref: Policy | None, cfg: TrainConfig,
          init: Policy | None = None, checkpoint_cb=None, checkpoint_interval: int = 0):
    """Minimize the classification loss starting from a copy of ``init`` (default ``pi_ref``).

    Returns ``(pi_theta, TrainLog)``.  With ``pi_ref=None`` the reference
    log-probability is the constant 0 (uniform reference ablation); ``init``
    is then required.
    """
    start = init if init is not None else pi_ref
    if start is None:
        raise ValueError("need a policy to initialize the learner from")
    pi_theta = start.copy(role="learner")
    _, sample_rng, drop_rng = _streams(cfg.seed, "trac")
    by_id = data.by_id()
    members = cd.members
    trajs = [by_id[m.traj_id] for m in members]
    if pi_ref is not None:
        ref_cache = [log_prob(pi_ref, t.states, t.actions) for t in trajs]
    else:
        ref_cache = [np.zeros(len(t)) for t in trajs]

    adam = nn.AdamState.zeros(pi_theta.spec.n_params)
    tlog = TrainLog()
    for step in range(1, cfg.train_steps + 1):
        picks = sample_rng.integers(len(members), size=cfg.batch_size)
        batch, ref_lp = [], []
        for j in picks:
            seg = sample_segment(trajs[j], cfg.segment_ratio, sample_rng)
            batch.append((seg, members[j].label, members[j].weight))
            ref_lp.append(ref_cache[j][seg.start : seg.start + len(seg)])
        out = trac_loss(batch, pi_theta, None, cd.lambda_d, cd.lambda_u, cfg.alpha, cfg.gamma,
                        rng=drop_rng, ref_log_probs=ref_lp)
        pi_theta.params, adam = nn.adam_step(pi_theta.params, out.grads, adam, cfg.lr)
        if step % cfg.log_interval == 0 or step == cfg.train_steps:
            labels = np.array([members[j].label for j in picks])
            tlog.append(step, out.loss, _masked_mean(out.psi, labels == 1), _masked_mean(out.psi, labels == 0),
                        np.linalg.norm(out.grads))
        if checkpoint_cb is not None and checkpoint_interval and step % checkpoint_interval == 0:
            checkpoint_cb(pi_theta, step)
    return pi_theta, tlog
