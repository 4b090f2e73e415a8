"""Recording containers, CSV/manifest I/O, cohort validation and decimation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import signal

ACTIVITIES = ("talk", "read", "video", "walk", "type", "solve", "cycle")
STATIC_ACTIVITIES = ("talk", "read", "video", "type", "solve")
DYNAMIC_ACTIVITIES = ("walk", "cycle")

RAW_CHANNELS = ("v1", "v2", "d1", "d2")
CSV_HEADER = ("t",) + RAW_CHANNELS
MANIFEST_HEADER = ("path", "subject", "activity", "rate_hz")

FIR_TAPS = 255
CUTOFF_FRACTION = 0.8


class RecordingFormatError(ValueError):
    """Raised when a recording or manifest file does not match its schema."""


@dataclass(frozen=True)
class Recording:
    """One subject/activity session of raw LFI samples.

    ``samples`` has shape ``(n, 4)`` with columns ``v1, v2, d1, d2``.
    """

    subject_id: str
    activity: str
    sampling_rate_hz: float
    samples: np.ndarray
    session_start: float | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 4:
            raise ValueError(f"samples must have shape (n, 4), got {samples.shape}")
        if samples.shape[0] == 0:
            raise ValueError("recording has no samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("recording contains non-finite samples")
        if not self.sampling_rate_hz > 0:
            raise ValueError("sampling_rate_hz must be positive")
        if self.activity not in ACTIVITIES:
            raise ValueError(f"unknown activity {self.activity!r}; expected one of {ACTIVITIES}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sampling_rate_hz

    def channel(self, name: str) -> np.ndarray:
        return self.samples[:, RAW_CHANNELS.index(name)]


@dataclass
class Cohort:
    recordings: list[Recording] = field(default_factory=list)

    @property
    def subjects(self) -> list[str]:
        return sorted({r.subject_id for r in self.recordings})

    @property
    def activities(self) -> list[str]:
        present = {r.activity for r in self.recordings}
        return [a for a in ACTIVITIES if a in present]

    @property
    def sampling_rate_hz(self) -> float:
        rates = {r.sampling_rate_hz for r in self.recordings}
        if len(rates) != 1:
            raise ValueError(f"cohort has mixed sampling rates: {sorted(rates)}")
        return rates.pop()

    def select(self, activities: Iterable[str] | None = None, subjects: Iterable[str] | None = None) -> "Cohort":
        acts = None if activities is None else set(activities)
        subs = None if subjects is None else set(subjects)
        return Cohort([
            r for r in self.recordings
            if (acts is None or r.activity in acts) and (subs is None or r.subject_id in subs)
        ])


@dataclass
class ValidationReport:
    durations: dict[tuple[str, str], float]
    subjects: list[str]
    activities: list[str]
    coverage: np.ndarray  # bool, subjects x ACTIVITIES
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "subjects": self.subjects,
            "activities": list(ACTIVITIES),
            "coverage": self.coverage.astype(int).tolist(),
            "durations_s": {f"{s}/{a}": d for (s, a), d in sorted(self.durations.items())},
            "violations": self.violations,
            "ok": self.ok,
        }


def _parse_float(text: str, path: Path, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise RecordingFormatError(f"{path}: line {line}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise RecordingFormatError(f"{path}: line {line}: column {column!r} is not finite: {text!r}")
    return value


def _scan_for_error(path: Path) -> None:
    """Slow row-by-row pass used only to produce a line-accurate diagnostic."""
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise RecordingFormatError(f"{path}: empty file") from None
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise RecordingFormatError(f"{path}: line 1: missing column(s) {missing}")
        cols = [header.index(c) for c in CSV_HEADER]
        n_rows = 0
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RecordingFormatError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            for c, name in zip(cols, CSV_HEADER):
                _parse_float(row[c], path, line, name)
            n_rows += 1
    if n_rows == 0:
        raise RecordingFormatError(f"{path}: no data rows")


def read_samples_csv(path: str | Path) -> np.ndarray:
    """Parse a ``t,v1,v2,d1,d2`` file into an ``(n, 5)`` array, validating every row."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=float, skip_blank_lines=True, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError):
        _scan_for_error(path)
        raise
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in CSV_HEADER if c not in frame.columns]
    if missing:
        raise RecordingFormatError(f"{path}: line 1: missing column(s) {missing}")
    data = frame[list(CSV_HEADER)].to_numpy(dtype=float)
    if data.shape[0] == 0:
        raise RecordingFormatError(f"{path}: no data rows")
    bad = ~np.isfinite(data)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        # Blank lines are skipped by the parser, so let the scan recover the physical line.
        _scan_for_error(path)
        raise RecordingFormatError(f"{path}: row {row + 1}: column {CSV_HEADER[col]!r} is not finite")
    return data


def load_recording(path: str | Path, declared_rate: float, subject_id: str = "unknown",
                   activity: str = "read") -> Recording:
    if not declared_rate > 0:
        raise ValueError("declared_rate must be positive")
    data = read_samples_csv(path)
    return Recording(subject_id, activity, float(declared_rate), data[:, 1:])


def save_recording(recording: Recording, path: str | Path, precision: int = 10) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    t = np.arange(len(recording)) / recording.sampling_rate_hz
    data = np.column_stack([t, recording.samples])
    np.savetxt(path, data, delimiter=",", header=",".join(CSV_HEADER), comments="",
               fmt=f"%.{precision}g")


def read_manifest(path: str | Path) -> list[tuple[Path, str, str, float]]:
    path = Path(path)
    entries = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for line, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if [c.strip() for c in row] == list(MANIFEST_HEADER):
                continue
            if len(row) != 4:
                raise RecordingFormatError(f"{path}: line {line}: expected path,subject,activity,rate_hz")
            rec_path = Path(row[0].strip())
            if not rec_path.is_absolute():
                rec_path = path.parent / rec_path
            activity = row[2].strip()
            if activity not in ACTIVITIES:
                raise RecordingFormatError(f"{path}: line {line}: unknown activity {activity!r}")
            rate = _parse_float(row[3], path, line, "rate_hz")
            entries.append((rec_path, row[1].strip(), activity, rate))
    return entries


def write_manifest(entries: Sequence[tuple[str | Path, str, str, float]], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for rec_path, subject, activity, rate in entries:
            writer.writerow([str(rec_path), subject, activity, repr(float(rate))])


def load_cohort(manifest: str | Path) -> Cohort:
    recs = [load_recording(p, rate, subject, activity) for p, subject, activity, rate in read_manifest(manifest)]
    return Cohort(recs)


def save_cohort(cohort: Cohort, directory: str | Path, precision: int = 10) -> Path:
    """Write every recording as CSV plus ``manifest.csv``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in cohort.recordings:
        name = f"{rec.subject_id}_{rec.activity}.csv"
        save_recording(rec, directory / name, precision=precision)
        entries.append((name, rec.subject_id, rec.activity, rec.sampling_rate_hz))
    manifest = directory / "manifest.csv"
    write_manifest(entries, manifest)
    return manifest


def validate_cohort(cohort: Cohort) -> ValidationReport:
    violations = []
    subjects = cohort.subjects
    coverage = np.zeros((len(subjects), len(ACTIVITIES)), dtype=bool)
    durations = {}
    seen = set()
    for rec in cohort.recordings:
        key = (rec.subject_id, rec.activity)
        if key in seen:
            violations.append(f"duplicate recording for subject {rec.subject_id!r}, activity {rec.activity!r}")
        seen.add(key)
        durations[key] = durations.get(key, 0.0) + rec.duration_s
        coverage[subjects.index(rec.subject_id), ACTIVITIES.index(rec.activity)] = True
    rates = sorted({r.sampling_rate_hz for r in cohort.recordings})
    if len(rates) > 1:
        violations.append(f"sampling rate mismatch: {rates}")
    if len(subjects) < 2:
        violations.append(f"identification impossible: <2 subjects (found {len(subjects)})")
    return ValidationReport(durations, subjects, cohort.activities, coverage, violations)


def decimation_filter(source_rate_hz: float, target_rate_hz: float) -> np.ndarray:
    return signal.firwin(FIR_TAPS, CUTOFF_FRACTION * target_rate_hz / 2, window="hamming",
                         fs=source_rate_hz)


def lowpass_zero_phase(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Forward-backward FIR filtering along axis 0.

    Reflect padding covers the half-length of the combined forward-backward
    response so neither pass reaches the zero extension.
    """
    pad = min(2 * (len(taps) // 2), x.shape[0] - 1)
    xp = np.pad(x, [(pad, pad)] + [(0, 0)] * (x.ndim - 1), mode="reflect")
    taps = taps.reshape((-1,) + (1,) * (x.ndim - 1))
    y = signal.fftconvolve(xp, taps, mode="same", axes=0)
    y = signal.fftconvolve(y[::-1], taps, mode="same", axes=0)[::-1]
    return y[pad:pad + x.shape[0]]


def decimate(recording: Recording, target_rate_hz: float) -> Recording:
    source = recording.sampling_rate_hz
    if target_rate_hz >= source:
        raise ValueError(f"target rate {target_rate_hz} Hz must be below source rate {source} Hz")
    ratio = source / target_rate_hz
    k = int(round(ratio))
    if k < 2 or abs(ratio - k) > 1e-9 * ratio:
        raise ValueError(f"{source} Hz is not an integer multiple of {target_rate_hz} Hz")
    n_out = len(recording) // k
    if n_out == 0:
        raise ValueError("recording shorter than one decimation step")
    filtered = lowpass_zero_phase(recording.samples, decimation_filter(source, target_rate_hz))
    return replace(recording, sampling_rate_hz=float(target_rate_hz), samples=filtered[: n_out * k : k])


def decimate_cohort(cohort: Cohort, target_rate_hz: float) -> Cohort:
    if target_rate_hz == cohort.sampling_rate_hz:
        return cohort
    return Cohort([decimate(r, target_rate_hz) for r in cohort.recordings])
