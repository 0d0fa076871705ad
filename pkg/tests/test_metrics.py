import numpy as np
import pytest

from asyncmtc.continuation import DetectionResult
from asyncmtc.metrics import TrialScore, aggregate, score_trial
from asyncmtc.model import GroundTruth


def truth_fixture():
    act = np.array([True, False, True, False, False])
    delays = np.array([2, 0, 1, 3, 0])
    h = np.arange(10, dtype=complex).reshape(5, 2) + 1.0
    return GroundTruth(act, delays, np.ones(5), h)


def result_from(truth, activity, delays, channels=None, max_delay=3):
    ind = np.zeros((activity.size, max_delay + 1), dtype=bool)
    act = np.flatnonzero(activity)
    ind[act, delays[act]] = True
    if channels is None:
        channels = np.where(activity[:, None], truth.channels, 0)
    return DetectionResult(activity, np.where(activity, delays, -1), channels, ind)


def test_perfect():
    t = truth_fixture()
    s = score_trial(result_from(t, t.activity.copy(), t.delays.copy()), t)
    assert not s.detection_error
    assert (s.missed_detections, s.false_alarms, s.delay_errors) == (0, 0, 0)
    assert s.channel_nmse == 0.0


def test_wrong_delay():
    t = truth_fixture()
    d = t.delays.copy()
    d[0] = 3
    s = score_trial(result_from(t, t.activity.copy(), d), t)
    assert s.detection_error and s.missed_detections == 0 and s.delay_errors == 1


def test_false_alarm():
    t = truth_fixture()
    a = t.activity.copy()
    a[4] = True
    s = score_trial(result_from(t, a, t.delays.copy()), t)
    assert s.false_alarms == 1 and s.detection_error


def test_missed_and_nmse():
    t = truth_fixture()
    a = t.activity.copy()
    a[2] = False
    ch = np.where(a[:, None], t.channels, 0)
    ch[0] = t.channels[0] * 1.1
    s = score_trial(result_from(t, a, t.delays.copy(), ch), t)
    assert s.missed_detections == 1
    # only device 0 is correctly detected: NMSE = 0.01
    assert s.channel_nmse == pytest.approx(0.01)


def test_dimension_mismatch():
    t = truth_fixture()
    bad = result_from(t, np.zeros(4, dtype=bool), np.zeros(4, dtype=int), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        score_trial(bad, t)


def test_relabeling_invariance():
    rng = np.random.default_rng(0)
    t = truth_fixture()
    a = np.array([True, True, False, False, True])
    d = np.array([2, 1, 0, 0, 0])
    r = result_from(t, a, d)
    perm = rng.permutation(5)
    tp = GroundTruth(t.activity[perm], t.delays[perm], t.path_loss[perm], t.channels[perm])
    rp = result_from(tp, a[perm], d[perm], r.channels[perm])
    assert score_trial(r, t) == score_trial(rp, tp)


def score(err=False, md=0, fa=0, de=0, na=10, ni=90, nmse=float("nan")):
    return TrialScore(err, md, fa, de, na, ni, nmse)


def test_aggregate_counts():
    agg = aggregate([score() for _ in range(10)])
    assert agg.detection_error_prob == 0 and agg.missed_detection_prob == 0 and agg.false_alarm_prob == 0
    assert np.isnan(agg.mean_channel_nmse)

    agg = aggregate([score(err=True, de=1), score(), score(), score()])
    assert agg.detection_error_prob == 0.25

    agg = aggregate([score(err=True, md=3)] + [score() for _ in range(9)])
    assert agg.missed_detection_prob == pytest.approx(0.03)
    assert agg.missed_realization_prob == pytest.approx(0.1)

    agg = aggregate([score(nmse=0.1), score(nmse=0.3)])
    assert agg.mean_channel_nmse == pytest.approx(0.2)

    with pytest.raises(ValueError):
        aggregate([])


def test_detection_error_dominates():
    rng = np.random.default_rng(1)
    scores = []
    for _ in range(200):
        md, fa, de = rng.integers(0, 2, size=3) * rng.integers(0, 3, size=3)
        scores.append(score(err=bool(md + fa + de), md=int(md), fa=int(fa), de=int(de)))
    agg = aggregate(scores)
    delay_rate = np.mean([s.delay_errors > 0 for s in scores])
    assert agg.detection_error_prob >= max(agg.missed_realization_prob, delay_rate)
    assert 0 <= agg.false_alarm_prob <= 1
