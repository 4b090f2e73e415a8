"""Synthetic multi-subject cohorts and analytic oracle signals.

Subject distinctiveness is parameter based. Each subject owns a point in a
normalised profile space; the high-frequency coordinates (ocular tremor
frequency and strength, spectral slope of the fixation noise) carry most of
the identity, while the low-frequency ones (saccade rate and amplitude,
distance oscillation) differ only weakly. Decimating a cohort therefore
removes most of what separates its subjects, and short windows see only noisy
estimates of the slowly modulated tremor. None of this is physiologically
validated; it exists to exercise the pipeline end to end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .dataio import ACTIVITIES, Cohort, Recording

# Normalised profile coordinates and the parameter range each maps onto.
HIGH_FREQ_PARAMS = {
    "tremor_frequency_hz": (40.0, 150.0),
    "fixation_tremor_std": (1.5, 6.0),
    "tremor_anisotropy": (0.5, 1.6),
    "velocity_noise_spectrum_slope": (0.6, 1.4),
}
LOW_FREQ_PARAMS = {
    "saccade_rate_hz": (2.2, 3.8),
    "saccade_amplitude_scale": (0.7, 1.4),
    "distance_oscillation_amplitude": (0.1, 0.4),
    "distance_oscillation_frequency_hz": (0.15, 0.45),
}
LOG_SCALED = {"tremor_frequency_hz", "fixation_tremor_std", "tremor_anisotropy", "saccade_amplitude_scale", "distance_oscillation_amplitude"}

# Activity baselines: saccade-rate factor, amplitude factor, horizontal bias, body motion (amp, cadence Hz).
ACTIVITY_BASE = {
    "talk": (0.8, 1.0, 0.5, 0.0, 0.0),
    "read": (1.3, 0.5, 0.9, 0.0, 0.0),
    "solve": (0.7, 0.8, 0.5, 0.0, 0.0),
    "video": (1.0, 1.2, 0.6, 0.0, 0.0),
    "type": (1.0, 0.9, 0.2, 0.0, 0.0),
    "walk": (0.9, 1.0, 0.5, 6.0, 1.9),
    "cycle": (0.8, 1.0, 0.5, 4.0, 1.3),
}

TREMOR_MODULATION_STD = 0.3  # log-amplitude spread of the slow tremor envelope
TREMOR_MODULATION_HZ = 0.8
TREMOR_ON_S = 1.0  # burst length
TREMOR_OFF_S = 1.5  # pause between bursts
TREMOR_JITTER = 0.1  # relative spread of both
NOISE_KNEE_HZ = 30.0
DISTANCE_BASELINE = 20.0
SACCADE_GAIN = 1.0  # velocity units per degree per second


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    saccade_rate_hz: float
    saccade_amplitude_scale: float
    fixation_tremor_std: float
    velocity_noise_spectrum_slope: float
    tremor_frequency_hz: float
    tremor_anisotropy: float
    distance_oscillation_amplitude: float
    distance_oscillation_frequency_hz: float
    activity_modulation: dict = field(default_factory=dict)  # activity -> (rate factor, amplitude factor)
    coords: tuple = ()
    seed: int = 0

    def __post_init__(self):
        for name in ("saccade_rate_hz", "saccade_amplitude_scale", "fixation_tremor_std",
                     "velocity_noise_spectrum_slope", "tremor_frequency_hz", "tremor_anisotropy",
                     "distance_oscillation_amplitude", "distance_oscillation_frequency_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _maximin_design(n: int, dims: int, rng: np.random.Generator, tries: int = 300) -> np.ndarray:
    """Latin hypercube with levels i/(n-1); the best of ``tries`` random ones by minimum distance."""
    levels = np.arange(n) / (n - 1)
    best, best_d = None, -1.0
    for _ in range(tries):
        pts = np.column_stack([levels[rng.permutation(n)] for _ in range(dims)])
        d = min_pairwise_distance(pts)
        if d > best_d:
            best, best_d = pts, d
    return best


def min_pairwise_distance(points: np.ndarray) -> float:
    d = np.linalg.norm(points[:, None] - points[None], axis=2)
    return float(d[~np.eye(len(points), dtype=bool)].min()) if len(points) > 1 else np.inf


def _map(name: str, u: float, ranges: dict) -> float:
    lo, hi = ranges[name]
    if name in LOG_SCALED:
        return float(np.exp(np.log(lo) + u * (np.log(hi) - np.log(lo))))
    return float(lo + u * (hi - lo))


def make_profiles(n_subjects: int, master_seed: int, separation: float = 1.0, low_freq_weight: float = 0.3,
                  activities: Sequence[str] = ACTIVITIES, design_seed: int | None = None) -> list[SubjectProfile]:
    """Profiles spread around the centre of profile space.

    ``separation`` scales every subject's offset from the centre, so the
    minimum pairwise distance grows linearly with it; 0 gives identical subjects.
    """
    if n_subjects < 2:
        raise ValueError("need at least two subjects")
    if not 0.0 <= separation <= 1.0:
        raise ValueError("separation must lie in [0, 1]")
    rng = np.random.default_rng(derive_seed(master_seed, "design" if design_seed is None else design_seed))
    hf = list(HIGH_FREQ_PARAMS)
    lf = list(LOW_FREQ_PARAMS)
    base = np.hstack([_maximin_design(n_subjects, len(hf), rng), _maximin_design(n_subjects, len(lf), rng)])
    scale = np.r_[np.ones(len(hf)), np.full(len(lf), low_freq_weight)] * separation
    coords = 0.5 + (base - 0.5) * scale
    if separation > 0 and min_pairwise_distance(coords) <= 0:
        raise AssertionError("profile design collapsed")
    profiles = []
    for s in range(n_subjects):
        sid = f"S{s + 1:02d}"
        mod = {}
        for a in activities:
            u = np.random.default_rng(derive_seed(master_seed, sid, a, "modulation")).uniform(-1, 1, 2)
            mod[a] = (float(1 + 0.1 * separation * u[0]), float(1 + 0.1 * separation * u[1]))
        params = {n: _map(n, coords[s, i], HIGH_FREQ_PARAMS) for i, n in enumerate(hf)}
        params.update({n: _map(n, coords[s, len(hf) + i], LOW_FREQ_PARAMS) for i, n in enumerate(lf)})
        profiles.append(SubjectProfile(sid, activity_modulation=mod, coords=tuple(coords[s].tolist()),
                                       seed=derive_seed(master_seed, sid), **params))
    return profiles


# --- signal components ----------------------------------------------------

def _slow_noise(rng, n: int, rate: float, cutoff_hz: float) -> np.ndarray:
    """Unit-variance Gaussian noise low-passed with a one-pole filter."""
    a = np.exp(-2 * np.pi * cutoff_hz / rate)
    z = sps.lfilter([1 - a], [1, -a], rng.standard_normal(n))
    return z / (z.std() + 1e-300)


def burst_gate(rng, n: int, rate: float, on_s: float = TREMOR_ON_S, off_s: float = TREMOR_OFF_S,
               jitter: float = TREMOR_JITTER, ramp_s: float = 0.05) -> np.ndarray:
    """Quasi-periodic on/off envelope with raised-cosine edges and a random start phase."""
    gate = np.zeros(n)
    t = -rng.uniform(0, on_s + off_s)
    while t < n / rate:
        dur = on_s * (1 + jitter * rng.uniform(-1, 1))
        gate[max(int(t * rate), 0):max(int((t + dur) * rate), 0)] = 1.0
        t += dur + off_s * (1 + jitter * rng.uniform(-1, 1))
    m = max(int(ramp_s * rate), 1)
    kernel = np.hanning(m + 2)[1:-1]
    return np.convolve(gate, kernel / kernel.sum(), mode="same")


def tremor(rng, n: int, rate: float, freq: float, std: float, q: float = 4.0,
           gate: np.ndarray | None = None) -> np.ndarray:
    """Narrowband resonance under a slowly varying log-normal envelope; silent above Nyquist."""
    if freq >= 0.45 * rate:
        return np.zeros(n)
    r = np.exp(-np.pi * freq / q / rate)
    w = 2 * np.pi * freq / rate
    x = sps.lfilter([1.0], [1.0, -2 * r * np.cos(w), r * r], rng.standard_normal(n))
    x /= x.std() + 1e-300
    env = np.exp(TREMOR_MODULATION_STD * _slow_noise(rng, n, rate, TREMOR_MODULATION_HZ))
    if gate is not None:
        env = env * gate
    return std * env * x


def shaped_noise(rng, n: int, rate: float, slope: float, std: float, knee_hz: float = NOISE_KNEE_HZ) -> np.ndarray:
    """Noise with power ~ (f/knee)^-slope above the knee and a weak floor below it."""
    spec = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
    f = np.fft.rfftfreq(n, 1 / rate)
    gain = np.where(f >= knee_hz, (np.maximum(f, knee_hz) / knee_hz) ** (-slope / 2), 0.15)
    # unit variance for a flat unit gain
    return std * np.sqrt(n / 2) * np.fft.irfft(spec * gain, n)


def saccade_train(rng, n: int, rate: float, rate_hz: float, amp_scale: float, horizontal_bias: float):
    """Raised-cosine velocity bumps at Poisson times; returns (v1, v2, displacement steps)."""
    v1 = np.zeros(n)
    v2 = np.zeros(n)
    steps = np.zeros(n)
    t = rng.exponential(1 / rate_hz)
    duration = n / rate
    while t < duration:
        amp = amp_scale * rng.lognormal(np.log(6.0), 0.5)  # degrees
        dur = np.clip(0.020 + 0.0022 * amp, 0.020, 0.080)
        m = max(int(round(dur * rate)), 2)
        start = int(t * rate)
        k = np.arange(m)
        bump = 1 - np.cos(2 * np.pi * (k + 0.5) / m)
        bump *= amp / (bump.sum() / rate)  # integrates to the amplitude
        theta = rng.normal(0.0, 0.4) if rng.random() < horizontal_bias else rng.uniform(0, 2 * np.pi)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        stop = min(start + m, n)
        v1[start:stop] += sign * np.cos(theta) * bump[:stop - start]
        v2[start:stop] += sign * np.sin(theta) * bump[:stop - start]
        if start < n:
            steps[start] += sign * amp
        t += dur + rng.exponential(1 / rate_hz)
    return v1, v2, steps


def body_motion(rng, n: int, rate: float, amp: float, cadence_hz: float) -> np.ndarray:
    if amp == 0:
        return np.zeros(n)
    t = np.arange(n) / rate
    phase = 2 * np.pi * cadence_hz * t + 0.5 * np.cumsum(_slow_noise(rng, n, rate, 0.2)) / rate
    return amp * (np.sin(phase) + 0.6 * _slow_noise(rng, n, rate, 4.0))


def simulate_recording(profile: SubjectProfile, activity: str, duration_s: float, rate_hz: float,
                       seed: int, tremor_override: tuple | None = None) -> Recording:
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    rate_f, amp_f, hbias, body_amp, cadence = ACTIVITY_BASE[activity]
    mod_rate, mod_amp = profile.activity_modulation.get(activity, (1.0, 1.0))
    freq, tstd, aniso, slope = tremor_override or (
        profile.tremor_frequency_hz, profile.fixation_tremor_std, profile.tremor_anisotropy,
        profile.velocity_noise_spectrum_slope)

    s1, s2, steps = saccade_train(rng, n, rate_hz, profile.saccade_rate_hz * rate_f * mod_rate,
                                  profile.saccade_amplitude_scale * amp_f * mod_amp, hbias)
    gate = burst_gate(rng, n, rate_hz)
    v1 = SACCADE_GAIN * s1 + tremor(rng, n, rate_hz, freq, tstd, gate=gate) + shaped_noise(rng, n, rate_hz, slope, 1.0)
    v2 = (SACCADE_GAIN * s2 + tremor(rng, n, rate_hz, freq * 1.07, aniso * tstd, gate=gate)
          + shaped_noise(rng, n, rate_hz, slope, 1.0))
    v1 += body_motion(rng, n, rate_hz, body_amp, cadence)
    v2 += body_motion(rng, n, rate_hz, 0.7 * body_amp, cadence)

    # gaze position relaxes back toward the centre between saccades
    leak = np.exp(-1.0 / (2.0 * rate_hz))
    pos = sps.lfilter([1.0], [1.0, -leak], steps)
    t = np.arange(n) / rate_hz
    osc = profile.distance_oscillation_amplitude * np.sin(2 * np.pi * profile.distance_oscillation_frequency_hz * t
                                                         + rng.uniform(0, 2 * np.pi))
    body_d = 0.05 * body_motion(rng, n, rate_hz, body_amp, cadence)
    d1 = DISTANCE_BASELINE + osc + 0.01 * pos + body_d + 0.01 * rng.standard_normal(n)
    d2 = DISTANCE_BASELINE + 0.8 * osc - 0.01 * pos + body_d + 0.01 * rng.standard_normal(n)
    return Recording(profile.subject_id, activity, float(rate_hz), np.column_stack([v1, v2, d1, d2]))


def generate_cohort(n_subjects: int = 10, activities: Sequence[str] = ACTIVITIES, duration_s: float = 120.0,
                    rate_hz: float = 1000.0, master_seed: int = 0, separation: float = 1.0,
                    low_freq_weight: float = 0.3, shifted_activities: Sequence[str] = (),
                    min_duration_s: float = 60.0) -> Cohort:
    """Deterministic cohort; ``shifted_activities`` get a subject-to-signature map unrelated to the others."""
    if n_subjects < 2:
        raise ValueError("need at least two subjects")
    if duration_s < min_duration_s:
        raise ValueError(f"duration_s must be >= {min_duration_s}")
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    unknown = [a for a in list(activities) + list(shifted_activities) if a not in ACTIVITY_BASE]
    if unknown:
        raise ValueError(f"unknown activities: {unknown}")
    profiles = make_profiles(n_subjects, master_seed, separation, low_freq_weight, activities)
    shifted = {}
    if shifted_activities:
        alt = make_profiles(n_subjects, master_seed, separation, low_freq_weight, activities, design_seed="shifted")
        # rotate so no subject keeps a signature close to its own
        order = np.roll(np.arange(n_subjects), n_subjects // 2)
        for p, q in zip(profiles, [alt[i] for i in order]):
            shifted[p.subject_id] = (q.tremor_frequency_hz, q.fixation_tremor_std, q.tremor_anisotropy,
                                     q.velocity_noise_spectrum_slope)
    recs = []
    for p in profiles:
        for a in activities:
            override = shifted[p.subject_id] if a in shifted_activities else None
            recs.append(simulate_recording(p, a, duration_s, rate_hz, derive_seed(master_seed, p.subject_id, a),
                                           override))
    return Cohort(recs)


# --- oracle signals -------------------------------------------------------

ORACLE_KINDS = ("white_noise", "ar1", "fgn_cumsum", "lorenz_x", "sinusoid")
LORENZ_LYAPUNOV = 0.906


@dataclass(frozen=True)
class OracleSignal:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    expected_property: dict = field(default_factory=dict)


def lorenz_rhs(s: np.ndarray, sigma: float = 10.0, rho: float = 28.0, beta: float = 8 / 3) -> np.ndarray:
    x, y, z = s
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def rk4_step(s: np.ndarray, dt: float, **kw) -> np.ndarray:
    k1 = lorenz_rhs(s, **kw)
    k2 = lorenz_rhs(s + 0.5 * dt * k1, **kw)
    k3 = lorenz_rhs(s + 0.5 * dt * k2, **kw)
    k4 = lorenz_rhs(s + dt * k3, **kw)
    return s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def lorenz_trajectory(n: int, dt: float = 0.01, transient: int = 10_000,
                      initial=(1.0, 1.0, 1.0), **kw) -> np.ndarray:
    """(n, 3) fixed-step RK4 states after discarding ``transient`` steps."""
    s = np.asarray(initial, dtype=float)
    for _ in range(transient):
        s = rk4_step(s, dt, **kw)
    out = np.empty((n, 3))
    for i in range(n):
        out[i] = s
        s = rk4_step(s, dt, **kw)
    return out


def generate_oracle(sig: OracleSignal, n: int) -> np.ndarray:
    p = sig.params
    if sig.kind not in ORACLE_KINDS:
        raise ValueError(f"unknown oracle kind {sig.kind!r}")
    if sig.kind in ("white_noise", "ar1", "fgn_cumsum") and n < 1024:
        raise ValueError("stochastic oracles need n >= 1024")
    rng = np.random.default_rng(sig.seed)
    if sig.kind == "white_noise":
        return rng.standard_normal(n)
    if sig.kind == "ar1":
        phi = float(p.get("phi", 0.8))
        e = rng.standard_normal(n)
        return sps.lfilter([1.0], [1.0, -phi], e)
    if sig.kind == "fgn_cumsum":
        return np.cumsum(rng.standard_normal(n))
    if sig.kind == "lorenz_x":
        return lorenz_trajectory(n, float(p.get("dt", 0.01)), int(p.get("transient", 10_000)),
                                 p.get("initial", (1.0, 1.0, 1.0)))[:, 0]
    amp = float(p.get("amplitude", 1.0))
    rate = float(p.get("rate_hz", 1000.0))
    freq = float(p.get("frequency_hz", 10.0))
    return amp * np.sin(2 * np.pi * freq * np.arange(n) / rate + float(p.get("phase", 0.0)))
