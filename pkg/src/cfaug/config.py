"""Experiment configuration: dataclasses, TOML/JSON loading, hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .perturb import PERTURBATION_TYPES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TOOL_VERSION = "0.1.0"

SAMPLING_KINDS = ("none", "pool", "synthesis")
ARM_POLICIES = (
    "none",  # no counterfactual augmentation at all
    "invariant",
    "trust",
    "wtrust",
    "random_pair",
    "training_only",
    "pc",
    "capc",
)


@dataclass(frozen=True)
class TrainSpec:
    learning_rate: float
    batch_size: int
    epochs: int
    weight_decay: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    n_seeds: int = 10
    folds: int = 10

    corpus_n: int = 4000
    train_fraction: float = 0.8

    pool_origins: int = 250
    per_example: int = 1
    types: tuple[str, ...] = PERTURBATION_TYPES

    policy: str = "capc"
    sampling: str = "none"
    budget_fraction: float = 0.1

    ablate_type: str | None = None
    ablate_scope: str | None = None  # h_only | h_and_f

    feature_dimension: int = 2**14
    n_gram_orders: tuple[int, ...] = (1, 2)
    hidden_dim: int = 64
    dropout_rate: float = 0.0  # training-time dropout for f
    h_dropout_rate: float = 0.5  # training-time dropout for the pairwise labeler
    mc_dropout_rate: float = 0.5  # dropout of the MC scoring posterior
    train_f: TrainSpec = TrainSpec(0.1, 16, 20)
    finetune_f: TrainSpec = TrainSpec(0.1, 16, 20)
    train_h: TrainSpec = TrainSpec(0.02, 8, 30)
    # h fine-tunes from a dropout-regularized twin of the base classifier
    # (the desk-scale analog of initializing the pairwise model from a
    # pretrained task checkpoint)
    h_warm_start: bool = True
    h_warm_start_dropout: float = 0.5

    mc_passes: int = 20
    synthesis_rounds: int = 5
    synthesis_per_origin: int = 3
    # score synthesis rounds with the base classifier's posterior; the
    # pairwise model's own posterior proved uninformative (see ledger)
    synthesis_score_with_h: bool = False

    ood_n: int = 1000
    eval_ood: bool = True

    def validate(self) -> None:
        if self.policy not in ARM_POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.sampling not in SAMPLING_KINDS:
            raise ConfigError(f"unknown sampling kind {self.sampling!r}")
        if not 0.0 < self.budget_fraction <= 1.0:
            raise ConfigError("budget_fraction must be in (0, 1]")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if self.corpus_n < 1 or self.pool_origins < 1 or self.per_example < 1:
            raise ConfigError("corpus_n, pool_origins and per_example must be positive")
        unknown = set(self.types) - set(PERTURBATION_TYPES)
        if unknown:
            raise ConfigError(f"unknown perturbation types {sorted(unknown)}")
        if self.ablate_type is not None:
            if self.ablate_type not in PERTURBATION_TYPES:
                raise ConfigError(f"unknown ablate_type {self.ablate_type!r}")
            if self.ablate_scope not in ("h_only", "h_and_f"):
                raise ConfigError("ablate_scope must be h_only or h_and_f")
        if self.sampling in ("pool", "synthesis") and self.policy not in ("pc", "capc"):
            raise ConfigError("active sampling requires a pairwise policy (pc or capc)")
        if self.synthesis_rounds < 1 or self.mc_passes < 1:
            raise ConfigError("synthesis_rounds and mc_passes must be >= 1")


def config_to_dict(config: ExperimentConfig) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(data: dict) -> ExperimentConfig:
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in ("train_f", "finetune_f", "train_h"):
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be a table of training parameters")
            extra = set(value) - {"learning_rate", "batch_size", "epochs", "weight_decay"}
            if extra:
                raise ConfigError(f"unknown keys in {key}: {sorted(extra)}")
            kwargs[key] = TrainSpec(**value)
        elif key in ("types", "n_gram_orders"):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a TOML config, falling back to JSON."""
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError:
            raise ConfigError(f"{path}: neither valid TOML nor valid JSON")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a table/object")
    return config_from_dict(data)


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    out_dir: str | Path,
    config: ExperimentConfig,
    config_path: str | None = None,
) -> dict:
    """RunManifest: config echo + hash + tool version + timestamps.

    Stored next to the outputs; report files themselves carry no
    timestamps so reruns stay byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_path": config_path,
        "config_hash": config_hash(config),
        "config": config_to_dict(config),
        "output_dir": str(out),
        "tool_version": TOOL_VERSION,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
