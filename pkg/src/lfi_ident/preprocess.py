"""Ten-channel kinematic representation and non-overlapping windowing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Recording

CHANNELS = ("v1", "v2", "a1", "a2", "j1", "j2", "theta", "vmag", "dd1", "dd2")
MIN_WINDOW = 16


@dataclass(frozen=True)
class DerivedChannels:
    data: np.ndarray  # (10, n), rows ordered as CHANNELS
    sampling_rate_hz: float
    subject_id: str
    activity: str

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != len(CHANNELS):
            raise ValueError(f"expected ({len(CHANNELS)}, n) channel array, got {self.data.shape}")

    def __len__(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[CHANNELS.index(name)]


@dataclass(frozen=True)
class Window:
    channels: np.ndarray  # (10, w)
    subject_id: str
    activity: str
    index: int
    sampling_rate_hz: float

    @property
    def w(self) -> int:
        return self.channels.shape[1]


def _backward_diff(x: np.ndarray, rate_hz: float) -> np.ndarray:
    d = np.diff(x) * rate_hz
    return np.concatenate([d[:1], d])


def derive_kinematics(v, rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Acceleration and jerk by backward differences, head-padded by repeating the first value."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] < 3:
        raise ValueError("derive_kinematics needs at least 3 samples")
    if not rate_hz > 0:
        raise ValueError("rate_hz must be positive")
    a = _backward_diff(v, rate_hz)
    # Differentiate only the genuinely computed part of a, so j's padding also repeats a real value.
    j_tail = np.diff(a[1:]) * rate_hz
    j = np.concatenate([j_tail[:1], j_tail[:1], j_tail])
    return a, j


def direction_and_magnitude(v1, v2) -> tuple[np.ndarray, np.ndarray]:
    """Direction angle arctan(v2/v1) in (-pi/2, pi/2] and velocity magnitude.

    At v1 == 0 the angle is sign(v2)*pi/2, and 0 when both components vanish.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise ValueError("v1 and v2 must have equal length")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        theta = np.arctan(v2 / v1)
    on_axis = v1 == 0
    theta[on_axis] = np.sign(v2[on_axis]) * (np.pi / 2)
    # arctan can return -pi/2 only for ratio -inf; keep the half-open interval.
    theta[theta == -np.pi / 2] = np.pi / 2
    return theta, np.hypot(v1, v2)


def distance_delta(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape[-1] < 2:
        raise ValueError("distance_delta needs at least 2 samples")
    return np.concatenate([[0.0], np.diff(d)])


def build_channels(recording: Recording) -> DerivedChannels:
    rate = recording.sampling_rate_hz
    v1, v2, d1, d2 = recording.samples.T
    a1, j1 = derive_kinematics(v1, rate)
    a2, j2 = derive_kinematics(v2, rate)
    theta, vmag = direction_and_magnitude(v1, v2)
    data = np.vstack([v1, v2, a1, a2, j1, j2, theta, vmag, distance_delta(d1), distance_delta(d2)])
    return DerivedChannels(data, rate, recording.subject_id, recording.activity)


def window_length(window_seconds: float, rate_hz: float) -> int:
    return int(np.floor(window_seconds * rate_hz + 0.5))


def segment_windows(channels: DerivedChannels, window_seconds: float) -> list[Window]:
    w = window_length(window_seconds, channels.sampling_rate_hz)
    if w < MIN_WINDOW:
        raise ValueError(f"window of {window_seconds} s at {channels.sampling_rate_hz} Hz has "
                         f"{w} samples; minimum is {MIN_WINDOW}")
    n_windows = len(channels) // w
    return [
        Window(channels.data[:, k * w:(k + 1) * w], channels.subject_id, channels.activity, k,
               channels.sampling_rate_hz)
        for k in range(n_windows)
    ]
