import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lfi_ident.dataio import Recording
from lfi_ident.preprocess import (CHANNELS, build_channels, derive_kinematics, direction_and_magnitude,
                                  distance_delta, segment_windows)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def _channels(n, rate=1000.0, samples=None):
    samples = np.zeros((n, 4)) if samples is None else samples
    return build_channels(Recording("S01", "read", rate, samples))


def test_ramp_kinematics():
    a, j = derive_kinematics([0, 1, 2, 3], 1.0)
    np.testing.assert_array_equal(a, [1, 1, 1, 1])
    np.testing.assert_array_equal(j, [0, 0, 0, 0])


def test_constant_kinematics():
    a, j = derive_kinematics(np.full(10, 4.2), 250.0)
    assert not a.any() and not j.any()


def test_sine_derivative():
    t = np.arange(2000) / 1000.0
    a, _ = derive_kinematics(np.sin(2 * np.pi * t), 1000.0)
    assert np.max(np.abs(a - 2 * np.pi * np.cos(2 * np.pi * t))) < 0.01 * 2 * np.pi


def test_kinematics_too_short():
    with pytest.raises(ValueError):
        derive_kinematics([1.0, 2.0], 1.0)


def test_head_padding_repeats_first_value():
    v = np.array([0.0, 1.0, 3.0, 6.0, 10.0])
    a, j = derive_kinematics(v, 1.0)
    np.testing.assert_array_equal(a, [1, 1, 2, 3, 4])
    np.testing.assert_array_equal(j, [1, 1, 1, 1, 1])


@pytest.mark.parametrize("v1,v2,theta,vmag", [
    (1.0, 1.0, np.pi / 4, np.sqrt(2)),
    (0.0, 0.0, 0.0, 0.0),
    (3.0, 4.0, np.arctan(4 / 3), 5.0),
    (0.0, 2.0, np.pi / 2, 2.0),
    (0.0, -2.0, np.pi / 2, 2.0),
])
def test_direction_examples(v1, v2, theta, vmag):
    t, m = direction_and_magnitude([v1], [v2])
    assert t[0] == pytest.approx(theta, abs=1e-12)
    assert m[0] == pytest.approx(vmag, rel=1e-12)


@given(arrays(np.float64, 20, elements=finite), arrays(np.float64, 20, elements=finite))
def test_theta_range_and_magnitude(v1, v2):
    theta, vmag = direction_and_magnitude(v1, v2)
    assert np.all(theta > -np.pi / 2) and np.all(theta <= np.pi / 2)
    assert np.all(vmag >= 0)
    np.testing.assert_allclose(vmag ** 2, v1 ** 2 + v2 ** 2, rtol=1e-9, atol=1e-300)


@given(arrays(np.float64, 20, elements=finite), arrays(np.float64, 20, elements=finite), st.floats(0, 2 * np.pi))
def test_vmag_rotation_invariant(v1, v2, phi):
    r1 = np.cos(phi) * v1 - np.sin(phi) * v2
    r2 = np.sin(phi) * v1 + np.cos(phi) * v2
    _, m = direction_and_magnitude(v1, v2)
    _, mr = direction_and_magnitude(r1, r2)
    np.testing.assert_allclose(mr, m, rtol=1e-9, atol=1e-9)


@given(arrays(np.float64, st.integers(3, 50), elements=finite), st.floats(-100, 100, allow_nan=False))
def test_kinematics_linear(v, alpha):
    a, j = derive_kinematics(v, 100.0)
    a2, j2 = derive_kinematics(alpha * v, 100.0)
    np.testing.assert_allclose(a2, alpha * a, rtol=1e-9, atol=1e-6)
    np.testing.assert_allclose(j2, alpha * j, rtol=1e-9, atol=1e-3)


def test_distance_delta_examples():
    np.testing.assert_array_equal(distance_delta([5, 5, 5]), [0, 0, 0])
    np.testing.assert_array_equal(distance_delta([1, 2, 4]), [0, 1, 2])
    s, r = 3.0, 100.0
    dd = distance_delta(s * np.arange(50) / r)
    np.testing.assert_allclose(dd[1:], s / r, rtol=1e-12)
    with pytest.raises(ValueError):
        distance_delta([1.0])


@given(arrays(np.float64, st.integers(2, 60), elements=finite))
def test_distance_delta_telescopes(d):
    assert np.sum(distance_delta(d)) == pytest.approx(d[-1] - d[0], rel=1e-9, abs=1e-9)


def test_constant_recording_channels():
    c = 1.5
    ch = _channels(100, samples=np.full((100, 4), c))
    for name in ("a1", "a2", "j1", "j2", "dd1", "dd2"):
        assert not ch[name].any()
    np.testing.assert_allclose(ch["theta"], np.pi / 4)  # v1 = v2 gives 45 degrees
    np.testing.assert_allclose(ch["vmag"], np.sqrt(2) * c)


def test_zero_recording_theta():
    ch = _channels(10)
    assert not ch["theta"].any()


def test_channel_shape(rng):
    ch = _channels(321, samples=rng.standard_normal((321, 4)))
    assert ch.data.shape == (10, 321)
    assert len(CHANNELS) == 10


def test_saccade_pulse_locality():
    n = 1000
    s = np.zeros((n, 4))
    k = np.arange(40)
    s[400:440, 0] = 1 - np.cos(2 * np.pi * (k + 0.5) / 40)
    ch = _channels(n, samples=s)
    assert not ch["a2"].any() and not ch["j2"].any()
    assert np.any(ch["a1"][395:445] != 0) and np.any(ch["j1"][395:445] != 0)
    assert not ch["a1"][:400].any() and not ch["a1"][441:].any()


@pytest.mark.parametrize("n,expected", [(5000, 1), (10500, 2), (4999, 0)])
def test_segment_counts(n, expected):
    assert len(segment_windows(_channels(n), 5.0)) == expected


def test_segment_round_half_up():
    ch = _channels(100, rate=10.0)
    assert segment_windows(ch, 2.05)[0].w == 21  # 20.5 rounds up


def test_segment_minimum():
    with pytest.raises(ValueError):
        segment_windows(_channels(100, rate=10.0), 1.0)


@given(st.integers(16, 400), st.integers(16, 64))
def test_segment_coverage(n, w):
    rng = np.random.default_rng(n)
    ch = _channels(n, rate=1.0, samples=rng.standard_normal((n, 4)))
    wins = segment_windows(ch, float(w))
    assert len(wins) == n // w
    assert [win.index for win in wins] == list(range(len(wins)))
    if wins:
        joined = np.concatenate([win.channels for win in wins], axis=1)
        np.testing.assert_array_equal(joined, ch.data[:, : w * (n // w)])
