"""End-to-end orchestration: generate, build, pretrain, train, evaluate.

Layout under ``cfg.out_dir``::

    dataset.jsonl  partition.csv  summary.csv
    seed_<s>/ref.ckpt  bc_safe.ckpt  trac.ckpt  trainlog.csv  eval_<method>.csv

Every CSV starts with a ``# config_hash=... stage=... format_version=1`` line.
A stage that is not requested loads its inputs from disk, so
``stages=("evaluate",)`` re-scores existing checkpoints without training.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from trac import neuralnet as nn
from trac.config import FIELD_TYPES, RunConfig, convert_value
from trac.contrastive import ContrastiveDataset, ContrastiveError, build, split_by_cost, write_partition_report
from trac.envs import PointHazardEnv, generate_dataset
from trac.metrics import EvalReport, evaluate_policy
from trac.policy import LEARNER, REFERENCE, Policy
from trac.trainer import pretrain_bc, train
from trac.trajectory_store import Dataset, DatasetFormatError, dataset_stats, read_dataset, write_dataset

log = logging.getLogger(__name__)

STAGES = ("generate", "build", "pretrain", "train", "evaluate")
METHODS = ("trac", "bc_all", "bc_safe")
FORMAT_VERSION = 1
VARIANTS = ("desirable_only", "undesirable_only", "uniform_ref")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


def header(cfg: RunConfig, stage: str) -> list[str]:
    return [f"config_hash={cfg.config_hash()} stage={stage} format_version={FORMAT_VERSION}"]


@dataclass(frozen=True)
class RunPaths:
    root: str

    @property
    def dataset(self) -> str:
        return os.path.join(self.root, "dataset.jsonl")

    @property
    def partition(self) -> str:
        return os.path.join(self.root, "partition.csv")

    @property
    def summary(self) -> str:
        return os.path.join(self.root, "summary.csv")

    def seed_dir(self, seed: int) -> str:
        return os.path.join(self.root, f"seed_{seed}")

    def checkpoint(self, seed: int, name: str) -> str:
        return os.path.join(self.seed_dir(seed), f"{name}.ckpt")

    def trainlog(self, seed: int) -> str:
        return os.path.join(self.seed_dir(seed), "trainlog.csv")

    def eval(self, seed: int, method: str) -> str:
        return os.path.join(self.seed_dir(seed), f"eval_{method}.csv")


@dataclass
class PipelineResult:
    cfg: RunConfig
    reports: dict[tuple[str, int], EvalReport] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def aggregate(self, method: str) -> tuple[float, float]:
        """Seed-averaged ``(normalized_reward, normalized_cost)``."""
        rows = [r for (m, _), r in self.reports.items() if m == method]
        if not rows:
            raise KeyError(f"no evaluation for method '{method}'")
        return float(np.mean([r.normalized_reward for r in rows])), float(np.mean([r.normalized_cost for r in rows]))


def _save_policy(path: str, policy: Policy, step: int, lineage: dict) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    nn.save_checkpoint(path, policy.spec, policy.params, step=step, lineage=lineage)


def _load_policy(path: str, role: str, stage: str) -> Policy:
    if not os.path.exists(path):
        raise StageError(stage, f"missing checkpoint {path}; run the earlier stages first")
    try:
        spec, params, _ = nn.load_checkpoint(path)
    except (OSError, ValueError) as exc:
        raise StageError(stage, str(exc)) from None
    return Policy(spec, params, role)


def load_or_generate(cfg: RunConfig, paths: RunPaths, generate: bool) -> Dataset:
    if cfg.dataset:
        try:
            return read_dataset(cfg.dataset)
        except (OSError, DatasetFormatError) as exc:
            raise StageError("generate", str(exc)) from None
    if generate:
        data = generate_dataset(PointHazardEnv(), cfg.generator_config())
        os.makedirs(paths.root, exist_ok=True)
        write_dataset(data, paths.dataset)
        return data
    try:
        return read_dataset(paths.dataset)
    except FileNotFoundError:
        raise StageError("generate", f"missing dataset {paths.dataset}; run gen-data first") from None
    except DatasetFormatError as exc:
        raise StageError("generate", str(exc)) from None


def build_contrastive(cfg: RunConfig, data: Dataset) -> ContrastiveDataset:
    try:
        return build(data, cfg.cost_threshold, cfg.x_pct, cfg.y_pct, cfg.delta, cfg.eta)
    except ContrastiveError as exc:
        raise StageError("build", str(exc)) from None


def _evaluate(cfg: RunConfig, data: Dataset, policy: Policy) -> EvalReport:
    stats = dataset_stats(data)
    return evaluate_policy(policy, PointHazardEnv(), cfg.eval_episodes, cfg.cost_threshold, stats.v_min, stats.v_max,
                           seed=cfg.eval_seed, eps=cfg.epsilon)


def run_pipeline(cfg: RunConfig, stages=STAGES) -> PipelineResult:
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stage(s): {sorted(unknown)}")
    paths = RunPaths(cfg.out_dir)
    os.makedirs(paths.root, exist_ok=True)
    result = PipelineResult(cfg)
    clock = time.perf_counter()

    data = load_or_generate(cfg, paths, "generate" in stages)
    result.timings["generate"] = time.perf_counter() - clock
    if stages == ("generate",):
        return result

    cd = build_contrastive(cfg, data)
    if "build" in stages:
        write_partition_report(data, cd, paths.partition, header(cfg, "build"))
        log.info("contrastive set: %d desirable, %d undesirable, lambda_d=%.4f lambda_u=%.4f",
                 cd.n_d, cd.n_u, cd.lambda_d, cd.lambda_u)

    for seed in cfg.seeds:
        os.makedirs(paths.seed_dir(seed), exist_ok=True)
        lineage = {"seed": seed, "config_hash": cfg.config_hash()}
        if "pretrain" in stages:
            t0 = time.perf_counter()
            ref = pretrain_bc(data, cfg.bc_config(seed), role=REFERENCE)
            _save_policy(paths.checkpoint(seed, "ref"), ref, cfg.pretrain_steps, {**lineage, "data": "all"})
            if "bc_safe" in cfg.baselines:
                safe_ids, _ = split_by_cost(data, cfg.cost_threshold)
                if not safe_ids:
                    raise StageError("pretrain", "no safe trajectories for the bc_safe baseline")
                bc_safe = pretrain_bc(data.subset(safe_ids), cfg.bc_config(seed), purpose="bc_safe", role=LEARNER)
                _save_policy(paths.checkpoint(seed, "bc_safe"), bc_safe, cfg.pretrain_steps, {**lineage, "data": "safe"})
            result.timings[f"pretrain_{seed}"] = time.perf_counter() - t0
        if "train" in stages:
            t0 = time.perf_counter()
            ref = _load_policy(paths.checkpoint(seed, "ref"), REFERENCE, "train")

            def save_intermediate(policy, step, seed=seed):
                _save_policy(paths.checkpoint(seed, f"trac_step{step}"), policy, step, lineage)

            try:
                pi, tlog = train(cd, data, ref, cfg.train_config(seed),
                                 checkpoint_cb=save_intermediate if cfg.checkpoint_interval else None,
                                 checkpoint_interval=cfg.checkpoint_interval)
            except (RuntimeError, FloatingPointError) as exc:
                raise StageError("train", f"seed {seed}: {exc}") from None
            _save_policy(paths.checkpoint(seed, "trac"), pi, cfg.train_steps, lineage)
            tlog.write_csv(paths.trainlog(seed), header(cfg, "train"))
            result.timings[f"train_{seed}"] = time.perf_counter() - t0
        if "evaluate" in stages:
            policies = {"trac": _load_policy(paths.checkpoint(seed, "trac"), LEARNER, "evaluate")}
            if "bc_all" in cfg.baselines:
                policies["bc_all"] = _load_policy(paths.checkpoint(seed, "ref"), LEARNER, "evaluate")
            if "bc_safe" in cfg.baselines:
                policies["bc_safe"] = _load_policy(paths.checkpoint(seed, "bc_safe"), LEARNER, "evaluate")
            for method, policy in policies.items():
                report = _evaluate(cfg, data, policy)
                report.write_csv(paths.eval(seed, method), header(cfg, "evaluate"))
                result.reports[(method, seed)] = report
                log.info("seed %d %-8s %s", seed, method, report.summary())

    if "evaluate" in stages:
        write_summary(result, paths.summary, header(cfg, "evaluate"))
    result.timings["total"] = time.perf_counter() - clock
    return result


SUMMARY_FIELDS = ["method", "seed", "normalized_reward", "normalized_cost", "safe", "mean_return", "mean_cost"]


def _summary_rows(reports: dict, label_key: str = "method"):
    rows = []
    groups: dict[str, list[EvalReport]] = {}
    for (name, seed), rep in reports.items():
        groups.setdefault(name, []).append(rep)
        rows.append({label_key: name, "seed": seed, "normalized_reward": repr(rep.normalized_reward),
                     "normalized_cost": repr(rep.normalized_cost), "safe": int(rep.safe),
                     "mean_return": repr(rep.mean_return), "mean_cost": repr(rep.mean_cost)})
    for name, reps in groups.items():
        nr = float(np.mean([r.normalized_reward for r in reps]))
        nc = float(np.mean([r.normalized_cost for r in reps]))
        rows.append({label_key: name, "seed": "mean", "normalized_reward": repr(nr), "normalized_cost": repr(nc),
                     "safe": int(nc <= 1.0), "mean_return": repr(float(np.mean([r.mean_return for r in reps]))),
                     "mean_cost": repr(float(np.mean([r.mean_cost for r in reps])))})
    return rows


def _write_rows(path: str, fields: list[str], rows: list[dict], header_lines) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_summary(result: PipelineResult, path: str, header_lines=()) -> None:
    _write_rows(path, SUMMARY_FIELDS, _summary_rows(result.reports), header_lines)


def read_summary(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


# ---------------------------------------------------------------- ablations

@dataclass
class AblationResult:
    variant: str
    reports: dict[tuple[str, int], EvalReport] = field(default_factory=dict)
    path: str = ""

    def aggregate(self, name: str) -> tuple[float, float]:
        rows = [r for (n, _), r in self.reports.items() if n == name]
        if not rows:
            raise KeyError(f"no evaluation for '{name}'")
        return float(np.mean([r.normalized_reward for r in rows])), float(np.mean([r.normalized_cost for r in rows]))


def _ensure_base(cfg: RunConfig) -> PipelineResult:
    """Reuse an existing full run in ``cfg.out_dir`` when its checkpoints are present."""
    paths = RunPaths(cfg.out_dir)
    have = all(os.path.exists(paths.checkpoint(s, name)) for s in cfg.seeds for name in ("ref", "trac"))
    if have and os.path.exists(paths.dataset if not cfg.dataset else cfg.dataset):
        return run_pipeline(cfg, stages=("evaluate",))
    return run_pipeline(cfg)


def run_ablation(cfg: RunConfig, variant: str, param: str | None = None, values=()) -> AblationResult:
    """Compare a loss/reference variant (or a one-parameter sweep) against full TraC.

    Writes ``ablation_<variant>.csv`` (``sweep_<param>.csv`` for sweeps) under
    ``cfg.out_dir`` with one row per variant per seed plus seed means.
    """
    if variant == "sweep":
        return _run_sweep(cfg, param, values)
    if variant not in VARIANTS:
        raise ValueError(f"unknown ablation '{variant}'; choose from {', '.join(VARIANTS + ('sweep',))}")
    base = _ensure_base(cfg)
    paths = RunPaths(cfg.out_dir)
    data = load_or_generate(cfg, paths, generate=False)
    cd = build_contrastive(cfg, data)
    if variant == "desirable_only":
        cd = cd.restrict([1])
    elif variant == "undesirable_only":
        cd = cd.restrict([0])
    out = AblationResult(variant, path=os.path.join(paths.root, f"ablation_{variant}.csv"))
    for seed in cfg.seeds:
        out.reports[("trac", seed)] = base.reports[("trac", seed)]
        ref = _load_policy(paths.checkpoint(seed, "ref"), REFERENCE, "train")
        tcfg = cfg.train_config(seed)
        if variant == "uniform_ref":
            pi, tlog = train(cd, data, None, tcfg, init=ref)
        else:
            pi, tlog = train(cd, data, ref, tcfg)
        _save_policy(paths.checkpoint(seed, variant), pi, cfg.train_steps, {"seed": seed, "variant": variant})
        tlog.write_csv(os.path.join(paths.seed_dir(seed), f"trainlog_{variant}.csv"), header(cfg, f"ablate:{variant}"))
        out.reports[(variant, seed)] = _evaluate(cfg, data, pi)
    _write_rows(out.path, ["variant"] + SUMMARY_FIELDS[1:], _summary_rows(out.reports, "variant"),
                header(cfg, f"ablate:{variant}"))
    return out


def _run_sweep(cfg: RunConfig, param: str | None, values) -> AblationResult:
    if param not in FIELD_TYPES or param in ("out_dir", "seeds", "dataset"):
        raise ValueError(f"cannot sweep over '{param}'")
    if not values:
        raise ValueError("sweep needs at least one value")
    paths = RunPaths(cfg.out_dir)
    os.makedirs(paths.root, exist_ok=True)
    dataset = cfg.dataset
    if not dataset and param not in ("n_trajectories", "avoidance_gains", "noise_scales", "data_seed"):
        load_or_generate(cfg, paths, generate=not os.path.exists(paths.dataset))
        dataset = paths.dataset
    out = AblationResult("sweep", path=os.path.join(paths.root, f"sweep_{param}.csv"))
    for raw in values:
        value = convert_value(param, str(raw))
        sub = dataclasses.replace(cfg, **{param: value, "dataset": dataset,
                                          "out_dir": os.path.join(paths.root, f"sweep_{param}", str(raw))})
        res = run_pipeline(sub)
        for seed in cfg.seeds:
            out.reports[(f"{param}={raw}", seed)] = res.reports[("trac", seed)]
    _write_rows(out.path, ["variant"] + SUMMARY_FIELDS[1:], _summary_rows(out.reports, "variant"),
                header(cfg, f"sweep:{param}"))
    return out
