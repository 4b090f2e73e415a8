"""End-to-end trend experiment on a synthetic cohort (rate, window, voting and held-out activity)."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .config import RunConfig, override
from .dataio import Cohort
from .evaluate import (RATE_SWEEP, FeatureCache, MetricsReport, SweepResult, evaluate_mode3, majority_vote,
                       run_mode1, run_mode2)
from .synth import generate_cohort

log = logging.getLogger(__name__)

TREND_WINDOWS = (0.5, 2.0, 5.0, 10.0)


@dataclass
class TrendResult:
    mode3: MetricsReport
    rate: SweepResult
    window: SweepResult
    vote: SweepResult
    shifted_activity: str
    mode1_shifted: MetricsReport
    mode2_shifted: MetricsReport
    timings: dict = field(default_factory=dict)

    def window_accuracy(self, seconds: float) -> float:
        return self.window.reports[self.window.values.index(seconds)].accuracy

    def to_dict(self) -> dict:
        return {
            "mode3": self.mode3.to_dict(), "rate": self.rate.to_dict(), "window": self.window.to_dict(),
            "vote": self.vote.to_dict(), "shifted_activity": self.shifted_activity,
            "mode1_shifted": self.mode1_shifted.to_dict(), "mode2_shifted": self.mode2_shifted.to_dict(),
            "timings": self.timings,
        }


def trend_cohort(master_seed: int = 0, shifted_activity: str = "cycle", **kw) -> Cohort:
    return generate_cohort(n_subjects=kw.pop("n_subjects", 10), duration_s=kw.pop("duration_s", 120.0),
                           rate_hz=kw.pop("rate_hz", 1000.0), master_seed=master_seed,
                           shifted_activities=(shifted_activity,), **kw)


def run_trends(cohort: Cohort, classifier: str = "gbdt", cfg: RunConfig = RunConfig(),
               shifted_activity: str = "cycle", rates=RATE_SWEEP, windows=TREND_WINDOWS,
               votes=(3, 4, 5), vote_window: float = 2.0, jobs: int = 1) -> TrendResult:
    cache = FeatureCache(cohort, jobs)
    timings = {}

    def timed(name, fn):
        t0 = time.time()
        out = fn()
        timings[name] = round(time.time() - t0, 1)
        log.info("%s done in %.1f s", name, timings[name])
        return out

    base_window = cfg.features.window_seconds
    native = cohort.sampling_rate_hz
    rate_reports = []
    for rate in rates:
        c = override(cfg, rate_hz=float(rate))
        rate_reports.append(timed(f"rate {rate}", lambda: evaluate_mode3(cache, classifier, c)))
    mode3 = (rate_reports[list(rates).index(native)] if native in rates
             else timed("mode3", lambda: evaluate_mode3(cache, classifier, cfg)))

    window_reports, vote_pred = [], None
    for w in windows:
        c = override(cfg, **{"features.window_seconds": float(w)})
        if w == base_window and native in rates:
            window_reports.append(mode3)
            continue
        report, pred = timed(f"window {w}", lambda: evaluate_mode3(cache, classifier, c, return_predictions=True))
        window_reports.append(report)
        if w == vote_window:
            vote_pred = pred
    if vote_pred is None:
        c = override(cfg, **{"features.window_seconds": float(vote_window)})
        _, vote_pred = evaluate_mode3(cache, classifier, c, return_predictions=True)
    vote = SweepResult("vote_N", list(votes), [majority_vote(vote_pred, n) for n in votes])

    m1 = timed("mode1", lambda: run_mode1(cache, shifted_activity, classifier, cfg))
    m2 = timed("mode2", lambda: run_mode2(cache, shifted_activity, classifier, cfg))
    return TrendResult(mode3, SweepResult("sampling_rate_hz", list(rates), rate_reports),
                       SweepResult("window_seconds", list(windows), window_reports), vote,
                       shifted_activity, m1, m2, timings)
