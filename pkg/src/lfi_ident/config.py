"""Dataclass configs and the stable config hash embedded in every output."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .features_freq import BANDS, WaveletConfig, WelchConfig
from .features_time import DEFAULT_BIN_COUNT, DfaConfig, LleConfig

CONFIG_ENV = "LFI_IDENT_CONFIG"


@dataclass(frozen=True)
class FeatureConfig:
    window_seconds: float = 5.0
    dfa: DfaConfig = DfaConfig()
    lle: LleConfig = LleConfig()
    welch: WelchConfig = WelchConfig()
    wavelet: WaveletConfig = WaveletConfig()
    bin_count: int = DEFAULT_BIN_COUNT
    bands: tuple = BANDS


@dataclass(frozen=True)
class LinearConfig:
    reg_grid: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
    epochs: int = 30
    seed: int = 0


@dataclass(frozen=True)
class GbdtConfig:
    rounds: int = 200
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_samples_leaf: int = 20
    l2_reg: float = 1.0
    max_bins: int = 256
    patience: int = 20
    seed: int = 0


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    val_fraction: float = 0.1
    test_fraction: float = 0.4
    # Leave-one-activity-out: share of each training stream (its chronological tail) kept for validation.
    holdout_val_fraction: float = 0.1

    def __post_init__(self):
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {total}, not 1")


@dataclass(frozen=True)
class RunConfig:
    features: FeatureConfig = FeatureConfig()
    linear: LinearConfig = LinearConfig()
    gbdt: GbdtConfig = GbdtConfig()
    split: SplitSpec = SplitSpec()
    rate_hz: float | None = None  # None: keep the recording rate
    seed: int = 0


_NESTED = {
    RunConfig: {"features": FeatureConfig, "linear": LinearConfig, "gbdt": GbdtConfig, "split": SplitSpec},
    FeatureConfig: {"dfa": DfaConfig, "lle": LleConfig, "welch": WelchConfig, "wavelet": WaveletConfig},
}


def to_dict(cfg) -> dict:
    """JSON-normalised form of a config dataclass (plain dicts pass through)."""
    return json.loads(json.dumps(cfg if isinstance(cfg, dict) else dataclasses.asdict(cfg)))


def from_dict(cls, data: dict):
    data = dict(data)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    for name, sub in _NESTED.get(cls, {}).items():
        if name in data:
            data[name] = from_dict(sub, data[name])
    for f in dataclasses.fields(cls):
        if f.name in data and isinstance(data[f.name], list):
            data[f.name] = tuple(tuple(v) if isinstance(v, list) else v for v in data[f.name])
    return cls(**data)


def config_hash(cfg) -> str:
    text = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read a JSON run config; falls back to ``$LFI_IDENT_CONFIG`` and then to defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    data = json.loads(Path(path).read_text())
    data.pop("config_hash", None)  # written by save_config; recomputed from the content
    return from_dict(RunConfig, data)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    doc = to_dict(cfg)
    doc["config_hash"] = config_hash(cfg)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def override(cfg, **changes):
    """``dataclasses.replace`` that accepts dotted keys, e.g. ``features.window_seconds``."""
    direct, nested = {}, {}
    for key, value in changes.items():
        head, _, rest = key.partition(".")
        if rest:
            nested.setdefault(head, {})[rest] = value
        else:
            direct[head] = value
    for head, sub in nested.items():
        direct[head] = override(getattr(cfg, head), **sub)
    return dataclasses.replace(cfg, **direct)
