"""Per-window feature vectors, the feature registry, standardisation and feature CSVs."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import FeatureConfig, config_hash
from .dataio import Cohort, Recording
from .features_freq import freq_feature_block, freq_feature_names
from .features_time import TIME_FEATURES, time_feature_block
from .preprocess import CHANNELS, Window, build_channels, segment_windows, window_length

log = logging.getLogger(__name__)

INDEX_COLUMNS = ("subject", "activity", "window_index")


def feature_registry(cfg: FeatureConfig, w: int) -> tuple[str, ...]:
    """Ordered feature names for windows of ``w`` samples: channel-major, time then frequency."""
    per_channel = list(TIME_FEATURES) + freq_feature_names(cfg.wavelet.resolve(w), cfg.bands)
    return tuple(f"{ch}_{name}" for ch in CHANNELS for name in per_channel)


def registry_hash(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple
    subject_id: str
    activity: str
    window_index: int
    degenerate_flags: np.ndarray


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (n, d)
    flags: np.ndarray  # (n, d) bool
    names: tuple
    subjects: np.ndarray
    activities: np.ndarray
    window_index: np.ndarray

    def __post_init__(self):
        n, d = self.values.shape
        if d != len(self.names):
            raise ValueError("values width does not match the registry")
        for arr in (self.subjects, self.activities, self.window_index):
            if len(arr) != n:
                raise ValueError("label arrays must have one entry per row")
        if self.flags.shape != self.values.shape:
            raise ValueError("flags must match values")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.subjects.tolist()))

    @property
    def registry_hash(self) -> str:
        return registry_hash(self.names)

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(self.values[i], self.names, str(self.subjects[i]), str(self.activities[i]),
                             int(self.window_index[i]), self.flags[i])

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(self.values[idx], self.flags[idx], self.names, self.subjects[idx],
                             self.activities[idx], self.window_index[idx])

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(values, self.flags, self.names, self.subjects, self.activities, self.window_index)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector]) -> "FeatureMatrix":
        if not vectors:
            raise ValueError("no feature vectors")
        names = vectors[0].names
        if any(v.names != names for v in vectors):
            raise ValueError("feature vectors use different registries")
        return cls(np.vstack([v.values for v in vectors]),
                   np.vstack([v.degenerate_flags for v in vectors]), names,
                   np.array([v.subject_id for v in vectors]), np.array([v.activity for v in vectors]),
                   np.array([v.window_index for v in vectors]))

    @classmethod
    def concat(cls, parts: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        parts = [p for p in parts if len(p)]
        if not parts:
            raise ValueError("nothing to concatenate")
        names = parts[0].names
        if any(p.names != names for p in parts):
            raise ValueError("feature matrices use different registries")
        return cls(np.vstack([p.values for p in parts]), np.vstack([p.flags for p in parts]), names,
                   np.concatenate([p.subjects for p in parts]), np.concatenate([p.activities for p in parts]),
                   np.concatenate([p.window_index for p in parts]))


def _window_block(blocks: np.ndarray, rate_hz: float, cfg: FeatureConfig):
    """Features for stacked windows ``(n_win, 10, w)`` -> ``(values, flags)`` of shape ``(n_win, d)``."""
    n_win, n_ch, w = blocks.shape
    rows = blocks.reshape(n_win * n_ch, w)
    tv, tf = time_feature_block(rows, rate_hz, cfg.dfa, cfg.lle, cfg.bin_count)
    fv, ff = freq_feature_block(rows, rate_hz, cfg.welch, cfg.wavelet, cfg.bands)
    values = np.concatenate([tv, fv], axis=1).reshape(n_win, -1)
    flags = np.concatenate([tf, ff], axis=1).reshape(n_win, -1)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite feature values")
    return values, flags


def extract_window(window: Window, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    values, flags = _window_block(window.channels[None], window.sampling_rate_hz, cfg)
    return FeatureVector(values[0], feature_registry(cfg, window.w), window.subject_id, window.activity,
                         window.index, flags[0])


def extract_recording(recording: Recording, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix | None:
    windows = segment_windows(build_channels(recording), cfg.window_seconds)
    w = window_length(cfg.window_seconds, recording.sampling_rate_hz)
    names = feature_registry(cfg, w)
    if not windows:
        log.warning("%s/%s shorter than one window", recording.subject_id, recording.activity)
        return None
    blocks = np.stack([win.channels for win in windows])
    values, flags = _window_block(blocks, recording.sampling_rate_hz, cfg)
    n = len(windows)
    return FeatureMatrix(values, flags, names, np.array([recording.subject_id] * n),
                         np.array([recording.activity] * n), np.arange(n))


def extract_cohort(cohort: Cohort, cfg: FeatureConfig = FeatureConfig(), jobs: int = 1) -> FeatureMatrix:
    """Feature matrix for every window of every recording, in recording order."""
    recs = cohort.recordings
    if jobs != 1 and len(recs) > 1:
        from joblib import Parallel, delayed
        parts = Parallel(n_jobs=jobs)(delayed(extract_recording)(r, cfg) for r in recs)
    else:
        parts = [extract_recording(r, cfg) for r in recs]
    return FeatureMatrix.concat([p for p in parts if p is not None])


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (values - self.mean) / safe, 0.0)


def fit_standardizer(train: FeatureMatrix) -> Standardizer:
    if len(train) == 0:
        raise ValueError("cannot fit a standardizer on an empty matrix")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    # Features whose spread is pure rounding noise are treated as constant.
    std = np.where(std <= 1e-12 * np.maximum(np.abs(mean), 1e-300), 0.0, std)
    return Standardizer(mean, std)


def apply_standardizer(s: Standardizer, m: FeatureMatrix) -> FeatureMatrix:
    return m.with_values(s.transform(m.values))


def write_feature_csv(m: FeatureMatrix, path: str | Path, cfg: FeatureConfig | None = None) -> None:
    """Feature CSV plus a ``.flags.csv`` sidecar with the degenerate-value flags."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"# registry_hash={m.registry_hash}"]
    if cfg is not None:
        header.append(f"# config_hash={config_hash(cfg)}")
    cols = ",".join(INDEX_COLUMNS + m.names)

    def dump(target: Path, body: np.ndarray, fmt: str):
        with target.open("w") as fh:
            fh.write("\n".join(header) + "\n" + cols + "\n")
            for i in range(len(m)):
                cells = [str(m.subjects[i]), str(m.activities[i]), str(int(m.window_index[i]))]
                fh.write(",".join(cells) + "," + ",".join(fmt % v for v in body[i]) + "\n")

    dump(path, m.values, "%.17g")
    dump(path.with_suffix(".flags.csv"), m.flags.astype(int), "%d")


def read_feature_header(path: str | Path) -> dict:
    meta = {}
    with Path(path).open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
    return meta


def read_feature_csv(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    import pandas as pd

    frame = pd.read_csv(path, comment="#", dtype={"subject": str, "activity": str},
                        float_precision="round_trip")
    names = tuple(frame.columns[3:])
    if tuple(frame.columns[:3]) != INDEX_COLUMNS:
        raise ValueError(f"{path}: feature CSV must start with {INDEX_COLUMNS}")
    flags_path = path.with_suffix(".flags.csv")
    if flags_path.exists():
        flags = pd.read_csv(flags_path, comment="#").iloc[:, 3:].to_numpy(dtype=bool)
    else:
        flags = np.zeros((len(frame), len(names)), dtype=bool)
    meta = read_feature_header(path)
    m = FeatureMatrix(frame.iloc[:, 3:].to_numpy(dtype=float), flags, names,
                      frame["subject"].to_numpy(dtype=str), frame["activity"].to_numpy(dtype=str),
                      frame["window_index"].to_numpy(dtype=int))
    if meta.get("registry_hash") not in (None, m.registry_hash):
        raise ValueError(f"{path}: registry hash mismatch")
    return m
