"""Run configuration: flat ``key = value`` files plus command-line overrides.

Defaults are the full-scale training values.  The ``desk`` profile swaps in
step counts and a network width that fit a single CPU core (see README).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from trac.envs import DEFAULT_COST_THRESHOLD, GeneratorConfig
from trac.trainer import TrainConfig


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in _split(text))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in _split(text))


def _split(text: str):
    parts = [p.strip() for p in str(text).split(",")]
    return [p for p in parts if p]


@dataclass
class RunConfig:
    # training
    pretrain_steps: int = 30_000
    train_steps: int = 100_000
    batch_size: int = 96
    lr: float = 1e-4
    bc_lr: float = 1e-4
    alpha: float = 0.2
    gamma: float = 0.99
    segment_ratio: float = 1.0
    dropout_rate: float = 0.25
    hidden_sizes: tuple[int, ...] = (256, 256)
    log_interval: int = 100
    checkpoint_interval: int = 0
    # contrastive construction
    cost_threshold: float = DEFAULT_COST_THRESHOLD
    x_pct: float = 50.0
    y_pct: float = 0.0
    delta: float = 0.7
    eta: float = 0.25
    # data
    dataset: str = ""
    n_trajectories: int = 2000
    avoidance_gains: tuple[float, ...] = GeneratorConfig.avoidance_gains
    noise_scales: tuple[float, ...] = GeneratorConfig.noise_scales
    data_seed: int = 0
    # evaluation
    eval_episodes: int = 20
    eval_seed: int = 1000
    epsilon: float = 1e-6
    baselines: tuple[str, ...] = ("bc_all", "bc_safe")
    # run
    seeds: tuple[int, ...] = (0, 1, 2)
    out_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes: requires eval_episodes >= 1")
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories: requires n_trajectories >= 1")
        if not self.avoidance_gains or not self.noise_scales:
            raise ConfigError("avoidance_gains / noise_scales: must be nonempty")
        if not self.epsilon > 0:
            raise ConfigError("epsilon: requires epsilon > 0")
        if self.bc_lr <= 0:
            raise ConfigError("bc_lr: requires bc_lr > 0")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval: requires checkpoint_interval >= 0")
        unknown = set(self.baselines) - {"bc_all", "bc_safe"}
        if unknown:
            raise ConfigError(f"baselines: unknown baseline(s) {sorted(unknown)}")
        try:
            self.train_config(self.seeds[0])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def train_config(self, seed: int, **overrides) -> TrainConfig:
        kw = dict(
            pretrain_steps=self.pretrain_steps, train_steps=self.train_steps, batch_size=self.batch_size,
            lr=self.lr, alpha=self.alpha, gamma=self.gamma, segment_ratio=self.segment_ratio, delta=self.delta,
            eta=self.eta, x_pct=self.x_pct, y_pct=self.y_pct, cost_threshold=self.cost_threshold, seed=seed,
            dropout_rate=self.dropout_rate, hidden_sizes=self.hidden_sizes, log_interval=self.log_interval,
        )
        kw.update(overrides)
        return TrainConfig(**kw)

    def bc_config(self, seed: int) -> TrainConfig:
        return self.train_config(seed, lr=self.bc_lr)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(self.n_trajectories, self.avoidance_gains, self.noise_scales, self.data_seed)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Hash of everything that influences results (the output directory does not)."""
        d = self.as_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "tuple[int, ...]": _ints,
    "tuple[float, ...]": _floats,
    "tuple[str, ...]": lambda s: tuple(_split(s)),
}

FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}

# desk-scale profile: what the acceptance suite runs on one CPU core
DESK_PROFILE = {
    "pretrain_steps": "10000",
    "train_steps": "3000",
    "hidden_sizes": "64,64",
    "lr": "3e-4",
    "bc_lr": "1e-3",
}


def convert_value(key: str, raw: str):
    kind = FIELD_TYPES[key]
    parser = _PARSERS[kind]
    try:
        return parser(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        values[key] = value
    return values


def parse_config(path: str | None = None, overrides: dict[str, str] | None = None, profile: str | None = None) -> RunConfig:
    """Defaults < profile < file < overrides."""
    raw: dict[str, str] = {}
    if profile == "desk":
        raw.update(DESK_PROFILE)
    elif profile not in (None, "", "full"):
        raise ConfigError(f"unknown profile '{profile}'")
    if path:
        with open(path) as fh:
            raw.update(parse_config_text(fh.read()))
    for key, value in (overrides or {}).items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown key '{key}'")
        if value is not None:
            raw[key] = str(value)
    return RunConfig(**{k: convert_value(k, v) for k, v in raw.items()})
