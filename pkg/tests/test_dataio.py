import subprocess

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lfi_ident.dataio import (ACTIVITIES, Cohort, Recording, RecordingFormatError, decimate, decimate_cohort,
                              load_cohort, load_recording, save_cohort, save_recording, validate_cohort)


def _write(path, rows, header="t,v1,v2,d1,d2"):
    path.write_text(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))
    return path


def _rec(samples, rate=1000.0, subject="S01", activity="read"):
    return Recording(subject, activity, rate, np.asarray(samples, dtype=float))


def test_load_three_rows(tmp_path):
    p = _write(tmp_path / "r.csv", ["0,1,2,3,4", "0.001,5,6,7,8", "0.002,9,10,11,12"])
    rec = load_recording(p, 1000.0)
    assert len(rec) == 3
    np.testing.assert_array_equal(rec.samples[:, 0], [1, 5, 9])
    assert rec.sampling_rate_hz == 1000.0


def test_nan_reports_line(tmp_path):
    p = _write(tmp_path / "r.csv", ["0,1,2,3,4", "0.001,NaN,6,7,8"])
    with pytest.raises(RecordingFormatError, match="line 3"):
        load_recording(p, 1000.0)


@pytest.mark.parametrize("rows,header,pattern", [
    (["0,1,2,3"], "t,v1,v2,d1", "column"),
    (["0,1,2,3,x"], "t,v1,v2,d1,d2", "line 2"),
    ([], "t,v1,v2,d1,d2", "no data rows"),
    (["0,1,2,3,inf"], "t,v1,v2,d1,d2", "line 2"),
])
def test_malformed_files(tmp_path, rows, header, pattern):
    p = _write(tmp_path / "r.csv", rows, header)
    with pytest.raises(RecordingFormatError, match=pattern):
        load_recording(p, 1000.0)


def test_zero_byte_file(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("")
    with pytest.raises(RecordingFormatError, match="empty"):
        load_recording(p, 1000.0)


def test_row_count_matches_line_count(tmp_path):
    # cohort-scale files are ~4e7 rows; the row-count contract is checked at 2e5 rows
    n = 200_000
    rng = np.random.default_rng(0)
    rec = _rec(rng.standard_normal((n, 4)))
    p = tmp_path / "big.csv"
    save_recording(rec, p)
    lines = int(subprocess.run(["wc", "-l", str(p)], capture_output=True, text=True).stdout.split()[0])
    assert len(load_recording(p, 1000.0)) == lines - 1 == n


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)))
def test_save_load_roundtrip(tmp_path_factory, samples):
    p = tmp_path_factory.mktemp("rt") / "r.csv"
    rec = _rec(samples)
    save_recording(rec, p, precision=17)
    back = load_recording(p, rec.sampling_rate_hz, rec.subject_id, rec.activity)
    np.testing.assert_array_equal(back.samples, rec.samples)


def test_recording_invariants():
    with pytest.raises(ValueError):
        _rec(np.zeros((0, 4)))
    with pytest.raises(ValueError):
        _rec(np.zeros((3, 4)), rate=0.0)
    with pytest.raises(ValueError):
        _rec(np.zeros((3, 4)), activity="sleep")
    with pytest.raises(ValueError):
        _rec(np.full((3, 4), np.nan))


def test_validate_full_grid():
    recs = [_rec(np.zeros((10, 4)), subject=f"S{s}", activity=a) for s in range(10) for a in ACTIVITIES]
    report = validate_cohort(Cohort(recs))
    assert report.coverage.shape == (10, 7) and report.coverage.all()
    assert report.ok


def test_validate_single_subject():
    report = validate_cohort(Cohort([_rec(np.zeros((10, 4)))]))
    assert any("identification impossible: <2 subjects" in v for v in report.violations)


def test_validate_mixed_rates():
    c = Cohort([_rec(np.zeros((10, 4)), 1000.0, "A"), _rec(np.zeros((10, 4)), 500.0, "B")])
    report = validate_cohort(c)
    assert any("rate mismatch" in v for v in report.violations)


def test_cohort_roundtrip(tmp_path, rng):
    c = Cohort([_rec(rng.standard_normal((50, 4)), subject=s, activity=a) for s in ("A", "B") for a in ("read", "walk")])
    manifest = save_cohort(c, tmp_path / "cohort", precision=17)
    back = load_cohort(manifest)
    assert [(r.subject_id, r.activity) for r in back.recordings] == [(r.subject_id, r.activity) for r in c.recordings]
    for a, b in zip(c.recordings, back.recordings):
        np.testing.assert_array_equal(a.samples, b.samples)


def test_decimate_length():
    rec = _rec(np.zeros((5000, 4)))
    out = decimate(rec, 250.0)
    assert len(out) == 1250 and out.sampling_rate_hz == 250.0


def test_decimate_constant():
    rec = _rec(np.full((3000, 4), 3.25))
    for target in (500.0, 250.0, 100.0, 50.0):
        np.testing.assert_allclose(decimate(rec, target).samples, 3.25, rtol=1e-12)


def test_decimate_sinusoid_amplitude():
    t = np.arange(20_000) / 1000.0
    x = np.sin(2 * np.pi * 10 * t)
    out = decimate(_rec(np.column_stack([x] * 4)), 100.0)
    expected = np.sin(2 * np.pi * 10 * np.arange(len(out)) / 100.0)
    interior = slice(50, -50)
    amp = np.sqrt(2 * np.mean(out.samples[interior, 0] ** 2))
    assert abs(amp - 1.0) < 0.02
    assert np.max(np.abs(out.samples[interior, 0] - expected[interior])) < 0.02


def test_decimate_errors():
    rec = _rec(np.zeros((100, 4)))
    with pytest.raises(ValueError):
        decimate(rec, 300.0)
    with pytest.raises(ValueError):
        decimate(rec, 1000.0)
    with pytest.raises(ValueError):
        decimate(rec, 2000.0)


def test_decimate_mean_preserved(rng):
    x = 5.0 + 0.1 * rng.standard_normal((40_000, 4))
    out = decimate(_rec(x), 250.0)
    interior = out.samples[200:-200]
    ref = x[800:-800]
    np.testing.assert_allclose(interior.mean(axis=0), ref.mean(axis=0), rtol=1e-3)


def test_decimate_cascade_matches_direct(rng):
    t = np.arange(40_000) / 1000.0
    x = sum(np.sin(2 * np.pi * f * t + p) for f, p in ((3, 0.1), (17, 1.0), (40, 2.0))) + 0.1 * rng.standard_normal(len(t))
    rec = _rec(np.column_stack([x] * 4))
    direct = decimate(rec, 250.0).samples[:, 0]
    cascade = decimate(decimate(rec, 500.0), 250.0).samples[:, 0]
    interior = slice(300, -300)
    rms = np.sqrt(np.mean((direct[interior] - cascade[interior]) ** 2)) / np.sqrt(np.mean(direct[interior] ** 2))
    assert rms < 0.01


def test_decimate_cohort_noop_at_same_rate():
    c = Cohort([_rec(np.zeros((10, 4)), subject="A"), _rec(np.zeros((10, 4)), subject="B")])
    assert decimate_cohort(c, 1000.0) is c
