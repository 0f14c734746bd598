"""Flat ``key = value`` run configuration.

Every field has a default and an empty file is a full-scale run.
``--preset desk`` shrinks training to 2,000 iterations and evaluation to 20
trials. Lines starting with ``#`` are comments. Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .errors import ConfigError
from .trainer import TrainConfig

PRESETS = {
    "paper": {},
    "desk": {"iterations": 2000, "trials": 20},
}


@dataclass(frozen=True)
class RunConfig:
    manifest: str = "data/manifest.csv"
    # training (see TrainConfig)
    gamma: float = 0.99
    lambda_recon: float = 0.03
    lambda_entropy: float = 0.005
    alpha: float = 0.005
    lr: float = 0.001
    batch_episodes: int = 32
    datasets_per_batch: int = 4
    iterations: int = 50_000
    budget: int = 20
    seed: int = 0
    model: str = "meta"
    log_every: int = 100
    checkpoint_every: int = 1000
    # evaluation
    trials: int = 100
    methods: str = "RAND,US,DFF,QBB"
    datasets: str = ""  # comma-separated subset of the manifest; empty means all
    held_out: str = ""  # comma-separated LOO folds / eval targets; empty means all
    single: bool = True
    counts: str = "1,4,7,13"
    subsets: int = 3
    workers: int = 1

    def __post_init__(self):
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.subsets < 1:
            raise ConfigError("subsets must be >= 1")
        self.train_config()  # validates the training fields

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            gamma=self.gamma, lambda_recon=self.lambda_recon, lambda_entropy=self.lambda_entropy,
            alpha=self.alpha, lr=self.lr, batch_episodes=self.batch_episodes,
            datasets_per_batch=self.datasets_per_batch, iterations=self.iterations, budget=self.budget,
            base_seed=self.seed, model=self.model, log_every=self.log_every,
            checkpoint_every=self.checkpoint_every,
        )

    def list_field(self, name: str) -> list[str]:
        return [s.strip() for s in getattr(self, name).split(",") if s.strip()]

    def count_list(self) -> list[int]:
        try:
            return [int(c) for c in self.list_field("counts")]
        except ValueError as exc:
            raise ConfigError(f"counts must be integers: {self.counts!r}") from exc

    def to_text(self) -> str:
        lines = ["# resolved configuration; every field expanded"]
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELDS[key].type
    raw = raw.strip()
    try:
        if kind in ("int", int):
            return int(raw.replace("_", ""))
        if kind in ("float", float):
            return float(raw)
        if kind in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from exc
    return raw


def parse_pairs(lines, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {line.strip()!r}")
        key, value = (s.strip() for s in text.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, preset: str = None, overrides: dict = None) -> RunConfig:
    """Defaults, then the preset, then the file, then explicit overrides."""
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                values.update(parse_pairs(fh, str(path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    return dataclasses.replace(RunConfig(), **values)
