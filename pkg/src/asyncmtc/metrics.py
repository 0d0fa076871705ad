"""Per-realization scoring and Monte Carlo aggregation.

A realization is in detection error when any activity-and-delay indicator is
wrong, which includes an active device detected with the wrong delay.  Missed
detection and false alarm probabilities are per device event; per-realization
rates are kept alongside so either convention can be reported.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
import math
from typing import Sequence

import numpy as np

from .continuation import DetectionResult
from .model import GroundTruth


@dataclass(frozen=True)
class TrialScore:
    detection_error: bool
    missed_detections: int
    false_alarms: int
    delay_errors: int
    num_active: int
    num_inactive: int
    # diagnostic only; NaN when no device was detected with its correct delay
    channel_nmse: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AggregateScore:
    num_trials: int
    detection_error_prob: float
    missed_detection_prob: float
    false_alarm_prob: float
    delay_error_prob: float
    missed_realization_prob: float
    false_alarm_realization_prob: float
    mean_channel_nmse: float

    def as_dict(self) -> dict:
        return asdict(self)


def score_trial(result: DetectionResult, truth: GroundTruth) -> TrialScore:
    n = truth.activity.size
    if result.activity.size != n:
        raise ValueError(f"result has {result.activity.size} devices, truth has {n}")
    max_delay = result.indicators.shape[1] - 1
    beta = truth.indicators(max_delay)

    act, est = truth.activity, result.activity
    missed = int(np.sum(act & ~est))
    false_alarms = int(np.sum(~act & est))
    both = act & est
    wrong_delay = both & (result.delays != truth.delays)
    correct = np.flatnonzero(both & ~wrong_delay)

    nmse = float("nan")
    if correct.size:
        ref = float(np.sum(np.abs(truth.channels[correct]) ** 2))
        err = float(np.sum(np.abs(result.channels[correct] - truth.channels[correct]) ** 2))
        nmse = err / ref if ref > 0 else float("nan")

    return TrialScore(
        detection_error=bool(np.any(result.indicators != beta)),
        missed_detections=missed,
        false_alarms=false_alarms,
        delay_errors=int(wrong_delay.sum()),
        num_active=int(act.sum()),
        num_inactive=int(n - act.sum()),
        channel_nmse=nmse,
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def aggregate(scores: Sequence[TrialScore]) -> AggregateScore:
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    t = len(scores)
    active = sum(s.num_active for s in scores)
    inactive = sum(s.num_inactive for s in scores)
    nmse = [s.channel_nmse for s in scores if not math.isnan(s.channel_nmse)]
    return AggregateScore(
        num_trials=t,
        detection_error_prob=sum(s.detection_error for s in scores) / t,
        missed_detection_prob=_ratio(sum(s.missed_detections for s in scores), active),
        false_alarm_prob=_ratio(sum(s.false_alarms for s in scores), inactive),
        delay_error_prob=_ratio(sum(s.delay_errors for s in scores), active),
        missed_realization_prob=sum(s.missed_detections > 0 for s in scores) / t,
        false_alarm_realization_prob=sum(s.false_alarms > 0 for s in scores) / t,
        mean_channel_nmse=float(np.mean(nmse)) if nmse else float("nan"),
    )
