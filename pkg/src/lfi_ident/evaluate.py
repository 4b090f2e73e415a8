"""Sequential splits, identification metrics, majority voting and the three evaluation modes."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import Model, ScoreMatrix, fit_classifier, predict_scores
from .config import RunConfig, config_hash, override, to_dict
from .dataio import Cohort, decimate_cohort
from .pipeline import FeatureMatrix, extract_cohort

log = logging.getLogger(__name__)

RATE_SWEEP = (1000, 500, 250, 125, 100, 50)
WINDOW_SWEEP = (0.5, 1, 2, 3, 4, 5, 6, 8, 10)
VOTE_SWEEP = (3, 4, 5)
VOTE_WINDOW_SECONDS = 2.0
AXES = {"rate": "sampling_rate_hz", "window": "window_seconds", "vote": "vote_N"}


@dataclass
class MetricsReport:
    accuracy: float
    eer: float
    far: float
    frr: float
    confusion: np.ndarray
    eer_threshold: float
    n_test: int
    classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy, "eer": self.eer, "far": self.far, "frr": self.frr,
            "accuracy_pct": round(100 * self.accuracy, 2), "eer_pct": round(100 * self.eer, 2),
            "far_pct": round(100 * self.far, 2), "frr_pct": round(100 * self.frr, 2),
            "eer_threshold": self.eer_threshold, "n_test": self.n_test,
            "classes": list(self.classes), "confusion": self.confusion.tolist(),
        }


@dataclass
class Predictions:
    scores: ScoreMatrix
    labels: np.ndarray
    subjects: np.ndarray
    activities: np.ndarray
    window_index: np.ndarray


@dataclass
class SweepResult:
    axis: str
    values: list
    reports: list

    def accuracies(self) -> list:
        return [r.accuracy for r in self.reports]

    def to_dict(self) -> dict:
        return {"axis": self.axis, "values": list(self.values), "reports": [r.to_dict() for r in self.reports]}


# --- splits ---------------------------------------------------------------

def _streams(m: FeatureMatrix) -> dict:
    """Row indices per (subject, activity), ordered by window index."""
    groups = {}
    keys = list(zip(m.subjects.tolist(), m.activities.tolist()))
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    return {k: np.array(sorted(v, key=lambda i: m.window_index[i])) for k, v in sorted(groups.items())}


def split_counts(n: int, train_fraction: float = 0.5, val_fraction: float = 0.1) -> tuple[int, int, int]:
    n_train = int(np.floor(train_fraction * n + 1e-9))
    n_val = int(np.floor(val_fraction * n + 1e-9))
    return n_train, n_val, n - n_train - n_val


def split_sequential(m: FeatureMatrix, spec=None):
    """Chronological train/val/test partition of every (subject, activity) stream."""
    spec = spec or RunConfig().split
    tr, va, te = [], [], []
    for (subject, activity), idx in _streams(m).items():
        n = len(idx)
        if n < 3:
            log.warning("stream %s/%s has %d windows; excluded from the split", subject, activity, n)
            continue
        if n < 10:
            log.warning("stream %s/%s has only %d windows", subject, activity, n)
        n_tr, n_va, _ = split_counts(n, spec.train_fraction, spec.val_fraction)
        tr.append(idx[:n_tr])
        va.append(idx[n_tr:n_tr + n_va])
        te.append(idx[n_tr + n_va:])
    cat = lambda parts: np.concatenate(parts) if parts else np.array([], dtype=int)
    return m.take(cat(tr)), m.take(cat(va)), m.take(cat(te))


def split_holdout_activity(m: FeatureMatrix, held_out: str, val_fraction: float = 0.1):
    """Train on every other activity (the last ``val_fraction`` of each stream validates), test on ``held_out``."""
    if held_out not in set(m.activities.tolist()):
        raise ValueError(f"activity {held_out!r} not present")
    tr, va, te = [], [], []
    for (_, activity), idx in _streams(m).items():
        if activity == held_out:
            te.append(idx)
            continue
        n_va = int(np.floor(val_fraction * len(idx) + 1e-9))
        tr.append(idx[:len(idx) - n_va])
        va.append(idx[len(idx) - n_va:])
    cat = lambda parts: np.concatenate(parts) if parts else np.array([], dtype=int)
    return m.take(cat(tr)), m.take(cat(va)), m.take(cat(te))


# --- metrics --------------------------------------------------------------

def error_rates(genuine: np.ndarray, impostor: np.ndarray, thresholds: np.ndarray):
    """False accepts (impostor > t) and false rejects (genuine < t); scores equal to t count as neither."""
    g = np.sort(genuine)
    i = np.sort(impostor)
    far = (len(i) - np.searchsorted(i, thresholds, side="right")) / len(i)
    frr = np.searchsorted(g, thresholds, side="left") / len(g)
    return far, frr


def equal_error_rate(genuine, impostor) -> tuple[float, float]:
    """EER and its threshold from a sweep over all distinct pooled scores.

    The crossing of the (non-increasing) FAR and (non-decreasing) FRR curves
    is interpolated linearly between adjacent thresholds.
    """
    genuine = np.asarray(genuine, dtype=float).ravel()
    impostor = np.asarray(impostor, dtype=float).ravel()
    if len(genuine) == 0 or len(impostor) == 0:
        raise ValueError("need both genuine and impostor scores")
    thresholds = np.unique(np.concatenate([genuine, impostor]))
    far, frr = error_rates(genuine, impostor, thresholds)
    # A threshold shared by genuine and impostor scores is no operating point
    # under the ties-abstain rule; it splits into "accept >= t" then "accept > t".
    g, i = np.sort(genuine), np.sort(impostor)
    far_ge = (len(i) - np.searchsorted(i, thresholds, side="left")) / len(i)
    frr_le = np.searchsorted(g, thresholds, side="right") / len(g)
    cross = (far_ge != far) & (frr_le != frr)
    if cross.any():
        rep = np.where(cross, 2, 1)
        pos = np.cumsum(rep) - 1  # last slot of each threshold
        thresholds = np.repeat(thresholds, rep)
        far, frr = np.repeat(far, rep), np.repeat(frr, rep)
        first = pos[cross] - 1
        far[first] = far_ge[cross]
        frr[pos[cross]] = frr_le[cross]
    diff = far - frr
    k = int(np.argmax(diff <= 0)) if np.any(diff <= 0) else len(diff) - 1
    if k == 0 or diff[k] > 0:
        return float((far[k] + frr[k]) / 2), float(thresholds[k])
    t = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = far[k - 1] + t * (far[k] - far[k - 1])
    return float(eer), float(thresholds[k - 1] + t * (thresholds[k] - thresholds[k - 1]))


def compute_metrics(scores: ScoreMatrix, labels, predicted=None) -> MetricsReport:
    """Accuracy, pooled one-vs-rest EER, and macro FAR/FRR from the confusion matrix.

    ``predicted`` overrides the argmax decision (used by majority voting).
    """
    labels = np.asarray(labels)
    S = np.asarray(scores.scores, dtype=float)
    classes = list(scores.classes)
    if S.shape[0] != len(labels):
        raise ValueError("one score row per label required")
    if len(set(labels.tolist())) < 2:
        raise ValueError("metrics need at least two classes among the labels")
    index = {c: i for i, c in enumerate(classes)}
    unknown = sorted(set(labels.tolist()) - set(classes))
    if unknown:
        raise ValueError(f"labels not among the score classes: {unknown}")
    y = np.array([index[c] for c in labels.tolist()])
    pred = scores.predicted_index() if predicted is None else np.array([index[c] for c in np.asarray(predicted).tolist()])

    C = len(classes)
    confusion = np.zeros((C, C), dtype=int)
    np.add.at(confusion, (y, pred), 1)
    n = len(y)
    accuracy = float(np.trace(confusion) / n)

    present = np.nonzero(confusion.sum(axis=1) > 0)[0]
    support = confusion.sum(axis=1)
    frr_c = 1.0 - np.diag(confusion)[present] / support[present]
    false_acc = confusion.sum(axis=0) - np.diag(confusion)
    far_c = false_acc[present] / (n - support[present])

    genuine_mask = np.zeros_like(S, dtype=bool)
    genuine_mask[np.arange(n), y] = True
    eer, thr = equal_error_rate(S[genuine_mask], S[~genuine_mask])
    return MetricsReport(accuracy, eer, float(far_c.mean()), float(frr_c.mean()), confusion, thr, n, classes)


def majority_vote(predictions: Predictions, n_votes: int) -> MetricsReport:
    """Metrics over non-overlapping runs of ``n_votes`` consecutive test windows per stream.

    The voted label is the modal prediction; ties go to the tied label with the
    highest summed score. EER uses group-mean scores.
    """
    if n_votes < 1:
        raise ValueError("n_votes must be >= 1")
    S = predictions.scores.scores
    classes = predictions.scores.classes
    pred_idx = predictions.scores.predicted_index()
    keys = list(zip(predictions.subjects.tolist(), predictions.activities.tolist()))
    streams = {}
    for i, k in enumerate(keys):
        streams.setdefault(k, []).append(i)
    mean_scores, voted, labels = [], [], []
    for k, rows in sorted(streams.items()):
        rows = sorted(rows, key=lambda i: predictions.window_index[i])
        n_groups = len(rows) // n_votes
        if n_groups == 0:
            log.warning("stream %s/%s shorter than %d windows; no vote groups", *k, n_votes)
        for g in range(n_groups):
            grp = np.array(rows[g * n_votes:(g + 1) * n_votes])
            counts = np.bincount(pred_idx[grp], minlength=len(classes))
            tied = np.nonzero(counts == counts.max())[0]
            summed = S[grp].sum(axis=0)
            winner = tied[np.argmax(summed[tied])]
            voted.append(classes[winner])
            mean_scores.append(S[grp].mean(axis=0))
            labels.append(predictions.labels[grp[0]])
    if not voted:
        raise ValueError("no complete vote groups")
    return compute_metrics(ScoreMatrix(np.array(mean_scores), classes), np.array(labels), np.array(voted))


# --- modes ----------------------------------------------------------------

class FeatureCache:
    """Memoises cohort feature extraction per (rate, window, feature config)."""

    def __init__(self, cohort: Cohort, jobs: int = 1):
        self.cohort = cohort
        self.jobs = jobs
        self._store = {}
        self._decimated = {}

    def features(self, cfg: RunConfig) -> FeatureMatrix:
        rate = cfg.rate_hz or self.cohort.sampling_rate_hz
        key = (float(rate), config_hash(cfg.features))
        if key not in self._store:
            if rate not in self._decimated:
                self._decimated[rate] = decimate_cohort(self.cohort, rate)
            t0 = time.time()
            self._store[key] = extract_cohort(self._decimated[rate], cfg.features, self.jobs)
            log.info("features at %g Hz / %g s: %s in %.1f s", rate, cfg.features.window_seconds,
                     self._store[key].values.shape, time.time() - t0)
        return self._store[key]


def _features(data, cfg: RunConfig, jobs: int = 1) -> FeatureMatrix:
    if isinstance(data, FeatureMatrix):
        return data
    if isinstance(data, FeatureCache):
        return data.features(cfg)
    return FeatureCache(data, jobs).features(cfg)


def train_and_predict(kind: str, train: FeatureMatrix, val: FeatureMatrix, test: FeatureMatrix,
                      cfg: RunConfig) -> tuple[Model, Predictions]:
    model = fit_classifier(kind, train, val, cfg.linear, cfg.gbdt)
    scores = predict_scores(model, test)
    return model, Predictions(scores, test.subjects, test.subjects, test.activities, test.window_index)


MODES = ("m1", "m2", "m3")


def mode_splits(m: FeatureMatrix, mode: str, activity: str | None, cfg: RunConfig = RunConfig()):
    """(train, val, test) for one evaluation mode; ``activity`` is required for m1 and m2."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "m3":
        return split_sequential(m, cfg.split)
    if activity is None:
        raise ValueError(f"mode {mode} needs an activity")
    if activity not in set(m.activities.tolist()):
        raise ValueError(f"activity {activity!r} not present")
    if mode == "m1":
        return split_sequential(m.take(np.nonzero(m.activities == activity)[0]), cfg.split)
    if len(set(m.activities.tolist())) < 2:
        raise ValueError("leave-one-activity-out needs at least two activities")
    train, val, test = split_holdout_activity(m, activity, cfg.split.holdout_val_fraction)
    check_holdout_disjoint(train, val, test, activity)
    return train, val, test


def run_mode(data, mode: str, activity: str | None = None, classifier_kind: str = "gbdt",
             cfg: RunConfig = RunConfig(), return_predictions: bool = False):
    m = _features(data, cfg)
    train, val, test = mode_splits(m, mode, activity, cfg)
    _, pred = train_and_predict(classifier_kind, train, val, test, cfg)
    report = compute_metrics(pred.scores, pred.labels)
    return (report, pred) if return_predictions else report


def run_mode1(data, activity: str, classifier_kind: str = "gbdt", cfg: RunConfig = RunConfig(),
              return_predictions: bool = False):
    """Train and test within a single activity."""
    return run_mode(data, "m1", activity, classifier_kind, cfg, return_predictions)


def check_holdout_disjoint(train: FeatureMatrix, val: FeatureMatrix, test: FeatureMatrix, held_out: str) -> None:
    seen = set(train.activities.tolist()) | set(val.activities.tolist())
    if held_out in seen:
        raise AssertionError(f"held-out activity {held_out!r} leaked into training")
    if set(test.activities.tolist()) != {held_out}:
        raise AssertionError("test split contains other activities")


def run_mode2(data, held_out_activity: str, classifier_kind: str = "gbdt", cfg: RunConfig = RunConfig(),
              return_predictions: bool = False):
    """Leave one activity out: train on the others, test on all windows of the held-out one."""
    return run_mode(data, "m2", held_out_activity, classifier_kind, cfg, return_predictions)


def evaluate_mode3(data, classifier_kind: str = "gbdt", cfg: RunConfig = RunConfig(),
                   return_predictions: bool = False):
    """Sequential split over all activities jointly."""
    return run_mode(data, "m3", None, classifier_kind, cfg, return_predictions)


def run_sweep(data, axis: str, values: Sequence, classifier_kind: str = "gbdt",
              cfg: RunConfig = RunConfig()) -> SweepResult:
    """One Mode-3 report per axis value; features are recomputed for every point."""
    if isinstance(data, Cohort):
        data = FeatureCache(data)
    short = {v: k for k, v in AXES.items()}.get(axis, axis)
    if short not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    axis = short
    reports = []
    if axis == "rate":
        for rate in values:
            reports.append(evaluate_mode3(data, classifier_kind, override(cfg, rate_hz=float(rate))))
    elif axis == "window":
        for seconds in values:
            reports.append(evaluate_mode3(data, classifier_kind,
                                          override(cfg, **{"features.window_seconds": float(seconds)})))
    elif axis == "vote":
        base = override(cfg, **{"features.window_seconds": VOTE_WINDOW_SECONDS})
        _, pred = evaluate_mode3(data, classifier_kind, base, return_predictions=True)
        reports = [majority_vote(pred, int(n)) for n in values]
    return SweepResult(AXES[axis], list(values), reports)


def run_mode3(data, classifier_kind: str = "gbdt", cfg: RunConfig = RunConfig(), sweeps=None) -> list:
    """All requested sweeps (default: the full rate, window and vote axes)."""
    if sweeps is None:
        sweeps = {"rate": RATE_SWEEP, "window": WINDOW_SWEEP, "vote": VOTE_SWEEP}
    if isinstance(data, Cohort):
        data = FeatureCache(data)
    return [run_sweep(data, axis, values, classifier_kind, cfg) for axis, values in sweeps.items()]


# --- report files ---------------------------------------------------------

def report_document(cfg: RunConfig, mode: str, body: dict) -> dict:
    return {"config_hash": config_hash(cfg), "mode": mode, "config": to_dict(cfg), **body}


def write_report(doc: dict, path: str | Path, run_log: str | Path | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if run_log is not None:
        entry = {"time": time.strftime("%Y-%m-%dT%H:%M:%S"), "report": str(path), **doc}
        with Path(run_log).open("a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
