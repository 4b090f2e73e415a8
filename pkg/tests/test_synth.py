import numpy as np
import pytest
from hypothesis import given, strategies as st

from lfi_ident.dataio import ACTIVITIES
from lfi_ident.synth import (HIGH_FREQ_PARAMS, LOW_FREQ_PARAMS, OracleSignal, SubjectProfile, burst_gate,
                             derive_seed, generate_cohort, generate_oracle, lorenz_rhs, lorenz_trajectory,
                             make_profiles, min_pairwise_distance, rk4_step, shaped_noise, tremor)


def test_cohort_dimensions():
    c = generate_cohort(10, ACTIVITIES, 60.0, 200.0, 0)
    assert len(c.recordings) == 70
    assert all(len(r) == 12_000 and r.samples.shape == (12_000, 4) for r in c.recordings)
    assert c.subjects == [f"S{i:02d}" for i in range(1, 11)] and c.activities == list(ACTIVITIES)


@pytest.mark.slow
def test_cohort_dimensions_full_rate():
    c = generate_cohort(3, ("read",), 120.0, 1000.0, 0)
    assert all(len(r) == 120_000 for r in c.recordings)


def test_cohort_determinism():
    a = generate_cohort(3, ("read", "walk"), 60.0, 250.0, 7, shifted_activities=("walk",))
    b = generate_cohort(3, ("read", "walk"), 60.0, 250.0, 7, shifted_activities=("walk",))
    for ra, rb in zip(a.recordings, b.recordings):
        assert ra.samples.tobytes() == rb.samples.tobytes()
    c = generate_cohort(3, ("read", "walk"), 60.0, 250.0, 8)
    assert a.recordings[0].samples.tobytes() != c.recordings[0].samples.tobytes()


def test_recording_seed_independent_of_cohort_shape():
    # per-recording seeds come from (master seed, subject, activity) only
    a = generate_cohort(4, ("read", "walk"), 60.0, 250.0, 3)
    b = generate_cohort(4, ("walk",), 60.0, 250.0, 3)
    ra = [r for r in a.recordings if r.activity == "walk"]
    for x, y in zip(ra, b.recordings):
        assert x.samples.tobytes() == y.samples.tobytes()


def test_cohort_validation():
    with pytest.raises(ValueError):
        generate_cohort(1, ("read",), 60.0)
    with pytest.raises(ValueError):
        generate_cohort(2, ("read",), 30.0)
    with pytest.raises(ValueError):
        generate_cohort(2, ("swim",), 60.0)
    with pytest.raises(ValueError):
        generate_cohort(2, ("read",), 60.0, rate_hz=0)


def test_profiles_distinct_and_scaled():
    full = make_profiles(10, 0, 1.0)
    half = make_profiles(10, 0, 0.5)
    d_full = min_pairwise_distance(np.array([p.coords for p in full]))
    d_half = min_pairwise_distance(np.array([p.coords for p in half]))
    assert d_full > 0
    assert d_half == pytest.approx(0.5 * d_full)
    same = make_profiles(10, 0, 0.0)
    assert len({p.tremor_frequency_hz for p in same}) == 1
    for p in full:
        for name, (lo, hi) in {**HIGH_FREQ_PARAMS, **LOW_FREQ_PARAMS}.items():
            assert lo - 1e-9 <= getattr(p, name) <= hi + 1e-9


def test_profile_validation():
    with pytest.raises(ValueError):
        SubjectProfile("S01", 3.0, 1.0, -1.0, 1.0, 80.0, 1.0, 0.2, 0.3)
    with pytest.raises(ValueError):
        make_profiles(4, 0, 1.5)


def test_derive_seed_stable():
    assert derive_seed(0, "S01", "read") == derive_seed(0, "S01", "read")
    assert derive_seed(0, "S01", "read") != derive_seed(0, "S01", "walk")
    assert 0 <= derive_seed(1, 2) < 2 ** 64


def test_tremor_components():
    rng = np.random.default_rng(0)
    n, rate = 2 ** 15, 1000.0
    x = tremor(rng, n, rate, 80.0, 2.0)
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(n, 1 / rate)
    assert abs(f[np.argmax(spec)] - 80.0) < 15
    assert np.all(tremor(rng, 100, 100.0, 80.0, 2.0) == 0)
    g = burst_gate(rng, n, rate)
    assert g.min() >= -1e-12 and g.max() <= 1 + 1e-12
    assert 0.25 < g.mean() < 0.6
    s = shaped_noise(np.random.default_rng(1), 2 ** 16, rate, 0.0, 1.0, knee_hz=1e-3)
    assert s.std() == pytest.approx(1.0, rel=0.02)


# --- oracle signals --------------------------------------------------------

def test_oracle_ar1_autocorrelation():
    x = generate_oracle(OracleSignal("ar1", {"phi": 0.8}, seed=1), 100_000)
    r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert r1 == pytest.approx(0.8, abs=0.02)


def test_oracle_white_and_cumsum():
    w = generate_oracle(OracleSignal("white_noise", seed=2), 50_000)
    assert abs(w.mean()) < 0.02 and w.std() == pytest.approx(1, abs=0.02)
    c = generate_oracle(OracleSignal("fgn_cumsum", seed=2), 50_000)
    np.testing.assert_allclose(np.diff(c), w[1:])


def test_oracle_sinusoid():
    x = generate_oracle(OracleSignal("sinusoid", {"amplitude": 1.0, "frequency_hz": 10.0, "rate_hz": 1000.0,
                                                  "phase": np.pi / 2}), 1000)
    assert np.max(np.abs(x)) == pytest.approx(1.0)
    np.testing.assert_allclose(x[:-100], x[100:], atol=1e-12)
    assert not np.allclose(x[:-50], x[50:])


def test_oracle_errors():
    with pytest.raises(ValueError):
        generate_oracle(OracleSignal("brownian"), 2048)
    with pytest.raises(ValueError):
        generate_oracle(OracleSignal("white_noise"), 512)
    assert len(generate_oracle(OracleSignal("sinusoid"), 10)) == 10


@given(st.integers(0, 10_000))
def test_oracle_deterministic(seed):
    sig = OracleSignal("ar1", {"phi": 0.5}, seed)
    assert generate_oracle(sig, 1024).tobytes() == generate_oracle(sig, 1024).tobytes()


def _step_error(s, dt):
    fine = s.copy()
    for _ in range(100):
        fine = rk4_step(fine, dt / 100)
    return np.linalg.norm(rk4_step(s, dt) - fine)


@pytest.fixture(scope="module")
def lorenz_states():
    return lorenz_trajectory(4000, 0.01, transient=1000)[::10]


def test_lorenz_rk4_fifth_order_local_error(lorenz_states):
    ratios = [_step_error(s, 0.01) / _step_error(s, 0.005) for s in lorenz_states[::20]]
    assert 20 < np.median(ratios) < 45  # 2**5 = 32 for a fourth-order method


def test_lorenz_rk4_residual_against_fine_reference(lorenz_states):
    # per-step deviation from a 100x finer RK4 integration, relative to the state norm
    worst = max(_step_error(s, 0.01) / np.linalg.norm(s) for s in lorenz_states)
    assert worst < 1e-6


def test_lorenz_consecutive_states_follow_field():
    dt = 0.01
    traj = lorenz_trajectory(2000, dt, transient=1000)
    fd = (traj[2:] - traj[:-2]) / (2 * dt)
    f = np.array([lorenz_rhs(s) for s in traj[1:-1]])
    assert np.max(np.abs(fd - f)) / np.abs(f).max() < 1e-2


def test_lorenz_stays_on_attractor():
    x = generate_oracle(OracleSignal("lorenz_x", {"dt": 0.01}), 5000)
    assert -25 < x.min() < -10 and 10 < x.max() < 25
