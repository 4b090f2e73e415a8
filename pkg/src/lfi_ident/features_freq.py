"""Welch PSD band powers, spectral entropy, and DWT statistics/entropies.

As in ``features_time``, kernels broadcast over leading axes and work on the
last one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .features_time import basic_stats, _is_constant

BANDS = ((0.1, 1.0), (1.0, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0), (30.0, 50.0))
MAX_SEGMENT = 2048

_SQ3 = np.sqrt(3.0)
WAVELET_FILTERS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    # Daubechies scaling filter with two vanishing moments (4 taps).
    "daubechies4": np.array([1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3]) / (4 * np.sqrt(2.0)),
}


def default_segment_length(w: int) -> int:
    return int(min(2 ** int(np.floor(np.log2(max(w / 2, 1)))), MAX_SEGMENT))


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int | None = None  # None: derived from the window length
    overlap_fraction: float = 0.5
    window_function: str = "hann"

    def __post_init__(self):
        if self.segment_length is not None:
            n = int(self.segment_length)
            if n < 2 or n & (n - 1):
                raise ValueError("segment_length must be a power of two")
        if not 0 <= self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must lie in [0, 1)")
        if self.window_function not in ("hann", "hamming", "rect"):
            raise ValueError(f"unknown window function {self.window_function!r}")

    def resolve(self, w: int) -> int:
        return default_segment_length(w) if self.segment_length is None else int(self.segment_length)


@dataclass(frozen=True)
class WaveletConfig:
    family: str = "daubechies4"
    levels: int | None = None  # None: min(4, max admissible)
    boundary: str = "symmetric"

    def __post_init__(self):
        if self.family not in WAVELET_FILTERS:
            raise ValueError(f"unknown wavelet family {self.family!r}")
        if self.boundary not in ("symmetric", "zero"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be >= 1")

    @property
    def filter_length(self) -> int:
        return len(WAVELET_FILTERS[self.family])

    def max_levels(self, w: int) -> int:
        return int(np.floor(np.log2(w / (self.filter_length - 1))))

    def resolve(self, w: int) -> int:
        bound = self.max_levels(w)
        levels = min(4, bound) if self.levels is None else self.levels
        if levels < 1 or levels > bound:
            raise ValueError(f"{levels} wavelet levels exceed the bound {bound} for length {w}")
        return levels


class Psd(NamedTuple):
    freqs: np.ndarray
    power: np.ndarray
    resolution_hz: float


def _taper(kind: str, n: int) -> np.ndarray:
    k = np.arange(n)
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * k / n)
    if kind == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * k / n)
    return np.ones(n)


def welch_psd(x, rate_hz: float, cfg: WelchConfig = WelchConfig()) -> Psd:
    """One-sided Welch PSD in power per Hz.

    Each segment's periodogram is normalised by the window power
    ``U = mean(w**2)`` and by ``N * rate_hz``, so that ``sum(power) * df``
    approximates the signal's mean square.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    seg = cfg.resolve(n)
    if seg > n:
        raise ValueError(f"segment length {seg} exceeds signal length {n}")
    step = max(1, int(round(seg * (1 - cfg.overlap_fraction))))
    n_seg = 1 + (n - seg) // step
    starts = np.arange(n_seg) * step
    segments = x[..., starts[:, None] + np.arange(seg)[None, :]]
    taper = _taper(cfg.window_function, seg)
    spec = np.fft.rfft(segments * taper, axis=-1)
    u = np.mean(taper ** 2)
    power = np.mean(np.abs(spec) ** 2, axis=-2) / (u * seg * rate_hz)
    if seg % 2 == 0:
        power[..., 1:-1] *= 2
    else:
        power[..., 1:] *= 2
    freqs = np.fft.rfftfreq(seg, 1.0 / rate_hz)
    return Psd(freqs, power, rate_hz / seg)


class BandPowers(NamedTuple):
    mean: np.ndarray  # (..., n_bands)
    peak: np.ndarray
    empty: np.ndarray  # (n_bands,) bool


def band_powers(psd: Psd, bands=BANDS) -> BandPowers:
    """Mean and peak PSD value over bins with centre in [lo, hi); DC never counts."""
    edges = [tuple(map(float, b)) for b in bands]
    for (lo, hi), nxt in zip(edges, edges[1:] + [None]):
        if not lo < hi or (nxt is not None and nxt[0] < hi):
            raise ValueError("bands must be ascending and non-overlapping")
    lead = psd.power.shape[:-1]
    mean = np.zeros(lead + (len(edges),))
    peak = np.zeros(lead + (len(edges),))
    empty = np.zeros(len(edges), dtype=bool)
    for b, (lo, hi) in enumerate(edges):
        sel = (psd.freqs >= lo) & (psd.freqs < hi) & (psd.freqs > 0)
        if not sel.any():
            empty[b] = True
            continue
        mean[..., b] = psd.power[..., sel].mean(axis=-1)
        peak[..., b] = psd.power[..., sel].max(axis=-1)
    return BandPowers(mean, peak, empty)


def _entropy_of(weights: np.ndarray):
    total = weights.sum(axis=-1, keepdims=True)
    zero = total[..., 0] <= 0
    p = np.divide(weights, total, out=np.zeros_like(weights), where=total > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(p > 0, p * np.log(p), 0.0), axis=-1)
    h = np.clip(h, 0.0, np.log(weights.shape[-1]))
    return np.where(zero, 0.0, h), zero


def spectral_entropy(psd: Psd):
    """Entropy (nats) of the normalised non-DC spectrum; 0 when there is no AC power."""
    if psd.power.shape[-1] < 3:
        raise ValueError("spectral_entropy needs at least 2 non-DC bins")
    h, _ = _entropy_of(psd.power[..., 1:])
    return float(h) if np.ndim(h) == 0 else h


class WaveletCoefficients(NamedTuple):
    details: list  # D1 (finest) .. DL
    approximation: np.ndarray  # AL
    lengths: list  # signal length entering each level, needed for reconstruction
    family: str
    boundary: str

    @property
    def levels(self) -> list:
        """All coefficient sets in feature order: D1..DL then AL."""
        return list(self.details) + [self.approximation]


def _qmf(h: np.ndarray) -> np.ndarray:
    g = h[::-1].copy()
    g[1::2] *= -1
    return g


def _analysis_step(x, h, g, boundary):
    length = len(h)
    pad = [(0, 0)] * (x.ndim - 1) + [(length - 1, length - 1)]
    xe = np.pad(x, pad, mode="symmetric" if boundary == "symmetric" else "constant")
    n_out = (x.shape[-1] + length - 1) // 2
    a = np.zeros(x.shape[:-1] + (n_out,))
    d = np.zeros_like(a)
    # Coefficient i sums filter tap j against extended sample 2i+1-j.
    for j in range(length):
        start = length - 1 + 1 - j
        chunk = xe[..., start: start + 2 * n_out: 2]
        a += h[j] * chunk
        d += g[j] * chunk
    return a, d


def _synthesis_step(a, d, h, g, n):
    length = len(h)
    out = np.zeros(a.shape[:-1] + (n,))
    # Adjoint of the analysis step: sample m gathers coefficients with 2i+1-m in [0, L).
    i = np.arange(a.shape[-1])
    for j in range(length):
        m = 2 * i + 1 - j
        ok = (m >= 0) & (m < n)
        out[..., m[ok]] += h[j] * a[..., ok] + g[j] * d[..., ok]
    return out


def dwt(x, cfg: WaveletConfig = WaveletConfig()) -> WaveletCoefficients:
    """Multi-level Mallat cascade with boundary extension; perfectly invertible with ``idwt``."""
    x = np.asarray(x, dtype=float)
    levels = cfg.resolve(x.shape[-1])
    h = WAVELET_FILTERS[cfg.family]
    g = _qmf(h)
    details, lengths = [], []
    a = x
    for _ in range(levels):
        lengths.append(a.shape[-1])
        a, d = _analysis_step(a, h, g, cfg.boundary)
        details.append(d)
    return WaveletCoefficients(details, a, lengths, cfg.family, cfg.boundary)


def idwt(coeffs: WaveletCoefficients) -> np.ndarray:
    h = WAVELET_FILTERS[coeffs.family]
    g = _qmf(h)
    a = coeffs.approximation
    for d, n in zip(reversed(coeffs.details), reversed(coeffs.lengths)):
        a = _synthesis_step(a, d, h, g, n)
    return a


class LevelStats(NamedTuple):
    mean: np.ndarray  # (..., L+1) in order D1..DL, AL
    variance: np.ndarray
    skewness: np.ndarray
    kurtosis: np.ndarray


def wavelet_stats(coeffs: WaveletCoefficients) -> LevelStats:
    cols = [basic_stats(c) for c in coeffs.levels]
    stack = lambda attr: np.stack([np.asarray(getattr(s, attr), dtype=float) for s in cols], axis=-1)
    return LevelStats(stack("mean"), stack("variance"), stack("skewness"), stack("kurtosis"))


def wavelet_entropy(coeffs: WaveletCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Per-level energy entropy (nats) and an all-zero-level flag, both ``(..., L+1)``."""
    hs, zeros = zip(*(_entropy_of(np.abs(c) ** 2) for c in coeffs.levels))
    return np.stack(hs, axis=-1), np.stack(zeros, axis=-1)


def freq_feature_names(levels: int, bands=BANDS) -> list[str]:
    names = []
    for lo, hi in bands:
        tag = f"band{lo:g}_{hi:g}"
        names += [f"{tag}_mean", f"{tag}_peak"]
    names.append("spec_entropy")
    level_tags = [f"D{j}" for j in range(1, levels + 1)] + [f"A{levels}"]
    for tag in level_tags:
        names += [f"wav{tag}_{s}" for s in ("mean", "variance", "skewness", "kurtosis")]
    names += [f"wavent_{tag}" for tag in level_tags]
    return names


def freq_feature_block(x, rate_hz: float, welch_cfg: WelchConfig = WelchConfig(),
                       wavelet_cfg: WaveletConfig = WaveletConfig(), bands=BANDS):
    """Frequency features for every row of a 2-D block: ``(values, flags)``.

    The window mean is removed before the PSD; DC plays no part in any
    spectral feature and its taper leakage would otherwise land in the
    lowest band.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n_rows = x.shape[0]
    const = _is_constant(x)
    centred = x - x.mean(axis=-1, keepdims=True)
    centred[const] = 0.0
    psd = welch_psd(centred, rate_hz, welch_cfg)
    bp = band_powers(psd, bands)
    s_ent, s_zero = _entropy_of(psd.power[..., 1:])
    coeffs = dwt(x, wavelet_cfg)
    ws = wavelet_stats(coeffs)
    w_ent, w_zero = wavelet_entropy(coeffs)

    n_bands = len(bands)
    band_cols = np.empty((n_rows, 2 * n_bands))
    band_cols[:, 0::2] = bp.mean
    band_cols[:, 1::2] = bp.peak
    band_flags = np.repeat(bp.empty, 2)[None, :].repeat(n_rows, axis=0)

    n_lv = ws.mean.shape[-1]
    stat_cols = np.stack([ws.mean, ws.variance, ws.skewness, ws.kurtosis], axis=-1).reshape(n_rows, 4 * n_lv)
    lv_const = np.stack([_is_constant(c) for c in coeffs.levels], axis=-1)
    stat_flags = np.zeros((n_rows, n_lv, 4), dtype=bool)
    stat_flags[..., 2:] = lv_const[..., None]

    values = np.column_stack([band_cols, s_ent, stat_cols, w_ent])
    flags = np.column_stack([band_flags, s_zero, stat_flags.reshape(n_rows, 4 * n_lv), w_zero])
    return values, flags


@dataclass
class FreqFeatures:
    names: tuple
    values: np.ndarray
    degenerate: frozenset

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


def extract_freq_features(x, rate_hz: float, welch_cfg: WelchConfig = WelchConfig(),
                          wavelet_cfg: WaveletConfig = WaveletConfig(), bands=BANDS) -> FreqFeatures:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("extract_freq_features takes one channel")
    values, flags = freq_feature_block(x[None, :], rate_hz, welch_cfg, wavelet_cfg, bands)
    names = tuple(freq_feature_names(wavelet_cfg.resolve(len(x)), bands))
    return FreqFeatures(names, values[0], frozenset(n for n, f in zip(names, flags[0]) if f))
