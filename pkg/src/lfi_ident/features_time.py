"""Time-domain window features.

Every kernel reduces along the last axis, so a ``(n_windows, w)`` block is
processed in one call; a 1-D input returns plain floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import NamedTuple, Union

import numpy as np

TIME_FEATURES = (
    "mean", "variance", "skewness", "kurtosis", "min", "max", "rms", "mad",
    "peak_to_peak", "zcr", "crest_factor", "lag1_autocorr", "hurst", "lle",
    "tkeo_mean", "tkeo_var", "entropy",
)

LLE_MIN_SAMPLES = 500
DEFAULT_BIN_COUNT = 64


def _out(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def _as_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise ValueError("expected a sequence")
    return x


def _is_constant(x: np.ndarray) -> np.ndarray:
    span = np.ptp(x, axis=-1)
    scale = np.max(np.abs(x), axis=-1)
    return span <= 1e-12 * scale


@dataclass(frozen=True)
class DfaConfig:
    n_min: int = 16
    n_max_fraction: float = 0.25
    n_scales: int = 12
    detrend_order: int = 1

    def __post_init__(self):
        if self.n_min < 8:
            raise ValueError("n_min must be >= 8")
        if not 0 < self.n_max_fraction <= 0.5:
            raise ValueError("n_max_fraction must lie in (0, 0.5]")
        if self.n_scales < 4:
            raise ValueError("n_scales must be >= 4")
        if self.detrend_order < 1:
            raise ValueError("detrend_order must be >= 1")


@dataclass(frozen=True)
class LleConfig:
    """Rosenstein estimator settings.

    ``horizon`` is the number of divergence steps tracked; ``"auto"`` uses
    ``horizon_periods`` mean periods, capped at half the embedded length.
    Reference trajectories are spread evenly over the window and capped at
    ``max_reference_points``; their nearest neighbours are searched among all
    admissible points.
    """

    embed_dim: int = 5
    delay: Union[int, str] = "auto"
    theiler_exclusion: Union[int, str] = "mean-period"
    fit_range_fraction: float = 0.1
    horizon: Union[int, str] = "auto"
    horizon_periods: float = 10.0
    max_reference_points: int = 128
    min_r_squared: float = 0.9

    def __post_init__(self):
        if self.embed_dim < 2:
            raise ValueError("embed_dim must be >= 2")
        if self.delay != "auto" and int(self.delay) < 1:
            raise ValueError("delay must be >= 1 or 'auto'")
        if self.theiler_exclusion != "mean-period" and int(self.theiler_exclusion) < 0:
            raise ValueError("theiler_exclusion must be >= 0 or 'mean-period'")
        if not 0 < self.fit_range_fraction <= 1:
            raise ValueError("fit_range_fraction must lie in (0, 1]")
        if self.max_reference_points < 1:
            raise ValueError("max_reference_points must be >= 1")


class BasicStats(NamedTuple):
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    min: float
    max: float
    rms: float
    mad: float


def basic_stats(x) -> BasicStats:
    """Population moments; skewness and (non-excess) kurtosis are 0 for constant input."""
    x = _as_rows(x)
    if x.shape[-1] < 2:
        raise ValueError("basic_stats needs at least 2 samples")
    mean = x.mean(axis=-1)
    dev = x - mean[..., None]
    sq = dev * dev
    m2 = np.mean(sq, axis=-1)
    const = _is_constant(x) | (m2 <= 0)
    # shape moments are scale-free; normalise first so the cube and fourth power cannot underflow
    scale = np.max(np.abs(dev), axis=-1)
    z = dev / np.where(const, 1.0, scale)[..., None]
    z2 = z * z
    r2 = np.where(const, 1.0, np.mean(z2, axis=-1))
    skew = np.where(const, 0.0, np.mean(z2 * z, axis=-1) / r2 ** 1.5)
    kurt = np.where(const, 0.0, np.mean(z2 * z2, axis=-1) / r2 ** 2)
    m2 = np.where(const, 0.0, m2)
    return BasicStats(
        _out(mean), _out(m2), _out(skew), _out(kurt),
        _out(x.min(axis=-1)), _out(x.max(axis=-1)),
        _out(np.sqrt(np.mean(x * x, axis=-1))),
        _out(np.where(const, 0.0, np.mean(np.abs(dev), axis=-1))),
    )


def amplitude_dynamics(x):
    """(peak_to_peak, zcr, crest_factor); zeros count as positive for the sign test."""
    x = _as_rows(x)
    n = x.shape[-1]
    if n < 2:
        raise ValueError("amplitude_dynamics needs at least 2 samples")
    p2p = np.ptp(x, axis=-1)
    positive = x >= 0
    zcr = np.count_nonzero(positive[..., 1:] != positive[..., :-1], axis=-1) / (n - 1)
    rms = np.sqrt(np.mean(x ** 2, axis=-1))
    peak = np.max(np.abs(x), axis=-1)
    crest = np.divide(peak, rms, out=np.zeros_like(rms), where=rms > 0)
    return _out(p2p), _out(zcr), _out(crest)


def lag1_autocorr(x):
    """Lag-1 autocorrelation normalised by the full-window sum of squares; 0 for constant input."""
    x = _as_rows(x)
    if x.shape[-1] < 3:
        raise ValueError("lag1_autocorr needs at least 3 samples")
    dev = x - x.mean(axis=-1, keepdims=True)
    num = np.sum(dev[..., :-1] * dev[..., 1:], axis=-1)
    den = np.sum(dev ** 2, axis=-1)
    ok = ~_is_constant(x) & (den > 0)
    return _out(np.divide(num, den, out=np.zeros_like(den), where=ok))


class DfaResult(NamedTuple):
    hurst: float
    degenerate: bool
    scales: np.ndarray
    fluctuations: np.ndarray


def dfa_scales(w: int, cfg: DfaConfig) -> np.ndarray:
    if w < 4 * cfg.n_min:
        raise ValueError(f"DFA needs w >= 4*n_min = {4 * cfg.n_min}, got {w}")
    n_max = cfg.n_max_fraction * w
    scales = np.unique(np.round(np.geomspace(cfg.n_min, n_max, cfg.n_scales)).astype(int))
    scales = scales[(scales >= cfg.n_min) & (scales > cfg.detrend_order + 1)]
    if len(scales) < 4:
        raise ValueError(f"only {len(scales)} usable DFA scales for w={w}")
    return scales


def _poly_basis(n: int, order: int) -> np.ndarray:
    t = np.linspace(-1.0, 1.0, n)
    q, _ = np.linalg.qr(np.vander(t, order + 1, increasing=True))
    return q


def dfa_fluctuations(x, cfg: DfaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Scales and the RMS detrended fluctuation F(n) of the integrated profile at each scale."""
    x = _as_rows(x)
    w = x.shape[-1]
    scales = dfa_scales(w, cfg)
    y = np.cumsum(x - x.mean(axis=-1, keepdims=True), axis=-1)
    fl = np.empty(x.shape[:-1] + (len(scales),))
    for i, n in enumerate(scales):
        k = w // n
        seg = y[..., : k * n].reshape(x.shape[:-1] + (k, n))
        q = _poly_basis(n, cfg.detrend_order)
        resid = seg - (seg @ q) @ q.T
        fl[..., i] = np.sqrt(np.mean(resid ** 2, axis=(-2, -1)))
    return scales, fl


def _hurst_from_fluct(x, scales, fl):
    """Log-log slope per row, skipping scales whose fluctuation is numerically zero."""
    y_rms = np.sqrt(np.mean(np.cumsum(x - x.mean(axis=-1, keepdims=True), axis=-1) ** 2, axis=-1))
    f_max = fl.max(axis=-1)
    usable = fl > 1e-9 * f_max[..., None]
    n_used = usable.sum(axis=-1)
    degenerate = _is_constant(x) | (f_max <= 1e-9 * y_rms) | (y_rms == 0) | (n_used < 4)
    log_n = np.broadcast_to(np.log(scales), fl.shape)
    log_f = np.log(np.where(usable, fl, 1.0))
    k = np.maximum(n_used, 1)
    ln_c = np.where(usable, log_n - (np.where(usable, log_n, 0).sum(axis=-1) / k)[..., None], 0.0)
    lf_c = np.where(usable, log_f - (np.where(usable, log_f, 0).sum(axis=-1) / k)[..., None], 0.0)
    denom = np.sum(ln_c ** 2, axis=-1)
    slope = np.sum(lf_c * ln_c, axis=-1) / np.where(denom > 0, denom, 1.0)
    return np.where(degenerate, 0.5, slope), degenerate


def hurst_dfa(x, cfg: DfaConfig = DfaConfig()) -> DfaResult:
    """Hurst exponent as the log-log slope of F(n); constant or fully detrended input gives 0.5, flagged."""
    x = _as_rows(x)
    scales, fl = dfa_fluctuations(x, cfg)
    h, degenerate = _hurst_from_fluct(x, scales, fl)
    return DfaResult(_out(h), _out(degenerate) if np.ndim(degenerate) else bool(degenerate), scales, fl)


class LyapunovResult(NamedTuple):
    exponent: float
    r_squared: float
    low_r_squared: bool
    divergence: np.ndarray  # mean log divergence per step
    horizon: int
    delay: int
    theiler: int
    n_pairs: int


def first_zero_crossing(x: np.ndarray) -> int:
    """Lag of the first non-positive autocorrelation value (1 if none is found)."""
    dev = x - x.mean()
    n = len(dev)
    spec = np.fft.rfft(dev, 2 * n)
    acf = np.fft.irfft(spec * np.conj(spec))[:n]
    below = np.nonzero(acf[1:] <= 0)[0]
    return int(below[0] + 1) if len(below) else 1


def mean_period(x: np.ndarray) -> float:
    """Period in samples of the dominant non-DC periodogram peak."""
    power = np.abs(np.fft.rfft(x - x.mean())) ** 2
    if len(power) < 2 or not np.any(power[1:] > 0):
        return 1.0
    k = int(np.argmax(power[1:]) + 1)
    return len(x) / k


def delay_embed(x: np.ndarray, embed_dim: int, delay: int) -> np.ndarray:
    n_vec = len(x) - (embed_dim - 1) * delay
    if n_vec <= 0:
        raise ValueError("series too short for the requested embedding")
    return np.stack([x[i * delay: i * delay + n_vec] for i in range(embed_dim)], axis=1)


def lyapunov_rosenstein(x, cfg: LleConfig = LleConfig(), rate_hz: float = 1.0,
                        full_curve: bool = False) -> LyapunovResult:
    """Largest Lyapunov exponent from the initial slope of the mean log-divergence curve.

    Returned in nats per unit time, i.e. the per-step slope times ``rate_hz``.
    The divergence curve is traced only over the fit region unless
    ``full_curve`` is set.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("lyapunov_rosenstein takes a 1-D series")
    w = len(x)
    if w < LLE_MIN_SAMPLES:
        raise ValueError(f"Rosenstein estimator needs >= {LLE_MIN_SAMPLES} samples, got {w}")
    m = cfg.embed_dim
    if cfg.delay == "auto":
        delay = max(1, min(first_zero_crossing(x), (w // 2 - 1) // m))
    else:
        delay = int(cfg.delay)
        if m * delay >= w / 2:
            raise ValueError("embed_dim * delay must be below w/2")
    emb = delay_embed(x, m, delay)
    n_vec = len(emb)

    if cfg.theiler_exclusion == "mean-period":
        theiler = int(np.ceil(mean_period(x)))
    else:
        theiler = int(cfg.theiler_exclusion)
    theiler = min(theiler, n_vec // 10)

    if cfg.horizon == "auto":
        # never so short that the fit region drops below 5 points
        horizon = max(int(np.ceil(cfg.horizon_periods * max(theiler, 1))), int(np.ceil(5 / cfg.fit_range_fraction)))
    else:
        horizon = int(cfg.horizon)
    horizon = max(5, min(horizon, n_vec // 2))
    n_fit = int(np.ceil(cfg.fit_range_fraction * horizon))
    if n_fit < 5:
        raise ValueError(f"divergence fit region has {n_fit} points; need at least 5")

    usable = n_vec - horizon + 1
    n_ref = min(cfg.max_reference_points, usable)
    refs = np.unique(np.linspace(0, usable - 1, n_ref).round().astype(int))

    pts = emb[:usable]
    sq = np.sum(pts ** 2, axis=1)
    d2 = sq[refs, None] + sq[None, :] - 2.0 * (pts[refs] @ pts.T)
    scale = np.std(x) * np.sqrt(m)
    floor = (1e-10 * scale) ** 2
    d2[d2 <= floor] = np.inf
    d2[np.abs(np.arange(usable)[None, :] - refs[:, None]) <= theiler] = np.inf
    nn = np.argmin(d2, axis=1)  # first minimum: ties go to the lower index
    has_pair = np.isfinite(d2[np.arange(len(refs)), nn])
    refs, nn = refs[has_pair], nn[has_pair]
    if len(refs) == 0:
        raise ValueError("no valid nearest-neighbour pairs")

    n_track = horizon if full_curve else n_fit
    steps = np.arange(n_track)
    diff = emb[refs[:, None] + steps[None, :]] - emb[nn[:, None] + steps[None, :]]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    positive = dist > 0
    logd = np.log(np.where(positive, dist, 1.0))
    counts = positive.sum(axis=0)
    curve = np.where(counts > 0, np.sum(np.where(positive, logd, 0.0), axis=0) / np.maximum(counts, 1), np.nan)

    fit_t = steps[:n_fit].astype(float)
    fit_y = curve[:n_fit]
    ok = np.isfinite(fit_y)
    if ok.sum() < 5:
        raise ValueError("divergence curve has fewer than 5 finite points")
    t, yv = fit_t[ok], fit_y[ok]
    tc, yc = t - t.mean(), yv - yv.mean()
    slope = float(tc @ yc / (tc @ tc))
    ss_res = np.sum((yc - slope * tc) ** 2)
    ss_tot = np.sum(yc ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LyapunovResult(float(slope * rate_hz), float(r2), bool(r2 < cfg.min_r_squared),
                          curve, horizon, delay, theiler, len(refs))


class TkeoResult(NamedTuple):
    psi: np.ndarray
    mean: float
    var: float


def tkeo(x) -> TkeoResult:
    x = _as_rows(x)
    if x.shape[-1] < 3:
        raise ValueError("tkeo needs at least 3 samples")
    psi = x[..., 1:-1] ** 2 - x[..., :-2] * x[..., 2:]
    return TkeoResult(psi, _out(psi.mean(axis=-1)), _out(psi.var(axis=-1)))


def histogram_entropy(x, bin_count: int = DEFAULT_BIN_COUNT):
    """Shannon entropy (nats) of an equal-width histogram over [min, max]."""
    x = _as_rows(x)
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    if x.shape[-1] < 2:
        raise ValueError("histogram_entropy needs at least 2 samples")
    rows = x.reshape(-1, x.shape[-1])
    lo = rows.min(axis=1, keepdims=True)
    span = np.ptp(rows, axis=1, keepdims=True)
    const = _is_constant(rows)[:, None] | (span == 0)
    scaled = np.divide(rows - lo, span, out=np.zeros_like(rows), where=~const)
    bins = np.minimum((scaled * bin_count).astype(np.int64), bin_count - 1)
    offsets = np.arange(rows.shape[0])[:, None] * bin_count
    counts = np.bincount((bins + offsets).ravel(), minlength=rows.shape[0] * bin_count)
    p = counts.reshape(rows.shape[0], bin_count) / rows.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(p > 0, p * np.log(p), 0.0), axis=1)
    h = np.clip(h, 0.0, np.log(bin_count))
    return _out(h.reshape(x.shape[:-1]))


@dataclass
class TimeFeatures:
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    min: float
    max: float
    rms: float
    mad: float
    peak_to_peak: float
    zcr: float
    crest_factor: float
    lag1_autocorr: float
    hurst: float
    lle: float
    tkeo_mean: float
    tkeo_var: float
    entropy: float
    degenerate: frozenset = field(default_factory=frozenset)

    def values(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self) if f.name != "degenerate"])


def time_feature_block(x, rate_hz: float, dfa_cfg: DfaConfig = DfaConfig(),
                       lle_cfg: LleConfig = LleConfig(), bin_count: int = DEFAULT_BIN_COUNT):
    """Time features for every row of a 2-D block: ``(values, flags)``, each ``(rows, 17)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n_rows, w = x.shape
    const = _is_constant(x)
    stats = basic_stats(x)
    p2p, zcr, crest = amplitude_dynamics(x)
    r1 = lag1_autocorr(x)
    try:
        scales, fl = dfa_fluctuations(x, dfa_cfg)
        hurst, hurst_deg = _hurst_from_fluct(x, scales, fl)
    except ValueError:  # window too short for four DFA scales
        hurst, hurst_deg = np.full(n_rows, 0.5), np.ones(n_rows, dtype=bool)
    tk = tkeo(x)
    ent = histogram_entropy(x, bin_count)

    lle = np.zeros(n_rows)
    lle_deg = np.ones(n_rows, dtype=bool)
    if w >= LLE_MIN_SAMPLES:
        for i in np.nonzero(~const)[0]:
            try:
                lle[i] = lyapunov_rosenstein(x[i], lle_cfg, rate_hz).exponent
                lle_deg[i] = False
            except ValueError:
                pass

    cols = [stats.mean, stats.variance, stats.skewness, stats.kurtosis, stats.min, stats.max,
            stats.rms, stats.mad, p2p, zcr, crest, r1, hurst, lle, tk.mean, tk.var, ent]
    values = np.column_stack([np.broadcast_to(np.asarray(c, dtype=float), (n_rows,)) for c in cols])
    flags = np.zeros_like(values, dtype=bool)
    col = {name: i for i, name in enumerate(TIME_FEATURES)}
    for name in ("skewness", "kurtosis", "lag1_autocorr", "entropy"):
        flags[:, col[name]] = const
    flags[:, col["crest_factor"]] = np.asarray(stats.rms) == 0
    flags[:, col["hurst"]] = hurst_deg
    flags[:, col["lle"]] = lle_deg
    return values, flags


def extract_time_features(x, rate_hz: float, dfa_cfg: DfaConfig = DfaConfig(),
                          lle_cfg: LleConfig = LleConfig(),
                          bin_count: int = DEFAULT_BIN_COUNT) -> TimeFeatures:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("extract_time_features takes one channel")
    values, flags = time_feature_block(x[None, :], rate_hz, dfa_cfg, lle_cfg, bin_count)
    flagged = frozenset(n for n, f in zip(TIME_FEATURES, flags[0]) if f)
    return TimeFeatures(*map(float, values[0]), degenerate=flagged)
