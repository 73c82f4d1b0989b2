"""JSON run configuration with strict key checking."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..bic_explore import ExploreConfig
from ..errors import ConfigError
from ..priors import PriorSpec, prior_from_dict

MODES = ("scaled", "theoretical")


@dataclass(frozen=True)
class ConstantsConfig:
    """Constants for the estimator of prior constants and the registry."""

    mode: str = "scaled"
    overrides: dict = field(default_factory=dict)
    use_documented_defaults: bool = False
    estimate_samples: int = 100_000
    estimate_dirs: int = 256
    prior_constants: dict | None = None


@dataclass(frozen=True)
class RunConfig:
    prior: dict
    lambda_bar: float
    seed: int = 0
    noise_sd: float = 1.0
    constants: ConstantsConfig = field(default_factory=ConstantsConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    canonicalize: bool = True
    base_dir: str | None = None

    def prior_spec(self) -> PriorSpec:
        return prior_from_dict(self.prior, base_dir=self.base_dir)

    def to_dict(self) -> dict:
        return {
            "prior": self.prior,
            "lambda_bar": self.lambda_bar,
            "seed": self.seed,
            "noise_sd": self.noise_sd,
            "constants": {f.name: getattr(self.constants, f.name) for f in fields(ConstantsConfig)},
            "explore": {f.name: getattr(self.explore, f.name) for f in fields(ExploreConfig)},
            "canonicalize": self.canonicalize,
        }


def _strict(cls, obj: dict, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in fields(cls)}
    extra = set(obj) - names
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")
    try:
        return cls(**obj)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(obj: dict, base_dir=None) -> RunConfig:
    obj = dict(obj)
    for key in ("prior", "lambda_bar"):
        if key not in obj:
            raise ConfigError(f"missing required key {key!r}")
    allowed = {f.name for f in fields(RunConfig)} - {"base_dir"}
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown keys in config: {sorted(extra)}")
    consts = _strict(ConstantsConfig, obj.pop("constants", {}), "constants")
    if consts.mode not in MODES:
        raise ConfigError(f"constants.mode must be one of {MODES}")
    explore = _strict(ExploreConfig, obj.pop("explore", {}), "explore")
    cfg = RunConfig(constants=consts, explore=explore, base_dir=None if base_dir is None else str(base_dir), **obj)
    if not cfg.lambda_bar > 0:
        raise ConfigError("lambda_bar must be positive")
    if cfg.noise_sd < 0:
        raise ConfigError("noise_sd must be non-negative")
    try:
        cfg.prior_spec()
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad prior: {exc}") from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(obj, base_dir=path.parent)
