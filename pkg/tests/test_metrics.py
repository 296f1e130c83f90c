import math

import numpy as np
import pytest

from donut.metrics import (EvalReport, GroundTruth, adjust, alert_delays, auc, best_fscore,
                           evaluate, prf_at_threshold, threshold_table)


def bits(s):
    return np.array([c == "1" for c in s])


# --- brute-force oracle: plain loops, no shared code with the library ----------

def oracle_segments(mask):
    segs, start = [], None
    for i, v in enumerate(list(mask) + [False]):
        if v and start is None:
            start = i
        elif not v and start is not None:
            segs.append((start, i))
            start = None
    return segs


def oracle_prf(labels, missing, scores, thr):
    n = len(labels)
    ok = [not missing[i] and not math.isnan(scores[i]) for i in range(n)]
    flag = [ok[i] and scores[i] >= thr for i in range(n)]
    adj = list(flag)
    for a, b in oracle_segments(labels):
        if any(flag[a:b]):
            for i in range(a, b):
                adj[i] = ok[i]
    tp = sum(1 for i in range(n) if ok[i] and labels[i] and adj[i])
    fp = sum(1 for i in range(n) if ok[i] and not labels[i] and adj[i])
    fn = sum(1 for i in range(n) if ok[i] and labels[i] and not adj[i])
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def oracle_candidates(missing, scores):
    vals = {s for s, m in zip(scores, missing) if not m and not math.isnan(s)}
    return sorted(vals) + [math.inf]


def oracle_best(labels, missing, scores):
    best = (-1.0, None)
    for c in oracle_candidates(missing, scores):
        f = oracle_prf(labels, missing, scores, c)[2]
        if f > best[0]:
            best = (f, c)
    return best


def oracle_ap(labels, missing, scores):
    prev, terms = 0.0, []
    for c in reversed(oracle_candidates(missing, scores)):
        p, r, _ = oracle_prf(labels, missing, scores, c)
        terms.append((r - prev) * p)
        prev = r
    return math.fsum(terms)


def random_case(rng):
    n = int(rng.integers(1, 51))
    labels = np.zeros(n, bool)
    for _ in range(int(rng.integers(0, 5))):
        a = int(rng.integers(0, n))
        labels[a:a + int(rng.integers(1, 8))] = True
    missing = rng.random(n) < 0.1
    if rng.random() < 0.5:
        scores = rng.integers(0, 6, n).astype(float)  # plenty of ties
    else:
        scores = rng.normal(size=n) + 2.0 * labels
    scores[:int(rng.integers(0, min(n, 5)))] = np.nan  # unscored prefix
    return labels, missing, scores


def test_brute_force_parity():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(200):
        labels, missing, scores = random_case(rng)
        if not np.any(~missing & ~np.isnan(scores)):
            continue
        truth = GroundTruth(labels, missing)
        cand, p, r, f = threshold_table(truth, scores)
        assert list(cand) == oracle_candidates(missing, scores)
        for i, c in enumerate(cand):
            assert (p[i], r[i], f[i]) == oracle_prf(labels, missing, scores, c)
            assert prf_at_threshold(truth, scores, c) == (p[i], r[i], f[i])
        best, thr, _ = best_fscore(truth, scores)
        assert (best, thr) == oracle_best(labels, missing, scores)
        if np.any(labels & ~missing & ~np.isnan(scores)):
            ap = auc(truth, scores)
            assert ap == oracle_ap(labels, missing, scores)
            assert 0.0 <= ap <= 1.0
        checked += 1
    assert checked > 180


def test_hand_example():
    truth = GroundTruth(bits("0110001110"))
    flags = bits("0010100000")
    np.testing.assert_array_equal(adjust(truth, flags), bits("0110100000"))
    scores = flags.astype(float)
    p, r, f = prf_at_threshold(truth, scores, 1.0)
    assert (p, r) == (2 / 3, 0.4)
    assert f == pytest.approx(0.5, abs=1e-15)


def test_adjust_edges():
    truth = GroundTruth(bits("0110001110"))
    assert not adjust(truth, np.zeros(10, bool)).any()
    scores = np.arange(10.0)
    assert prf_at_threshold(truth, scores, -1.0)[1] == 1.0
    assert alert_delays(truth, scores, -1.0) == [0, 0]
    assert prf_at_threshold(truth, scores, 100.0) == (1.0, 0.0, 0.0)


def test_missing_points_ignored():
    truth = GroundTruth(bits("0110"), bits("0100"))
    scores = np.array([0.0, 5.0, 1.0, 0.0])
    # the missing anomaly point neither helps detection nor counts as a miss
    assert prf_at_threshold(truth, scores, 1.0) == (1.0, 1.0, 1.0)
    assert prf_at_threshold(truth, scores, 2.0) == (1.0, 0.0, 0.0)


def test_perfect_separation():
    labels = bits("0011000100")
    scores = np.where(labels, 5.0, 1.0) + np.arange(10) * 0.01
    truth = GroundTruth(labels)
    assert best_fscore(truth, scores)[0] == 1.0
    assert auc(truth, scores) == 1.0
    assert best_fscore(GroundTruth(bits("1")), np.array([0.3]))[0] == 1.0


def test_constant_scores_auc_is_prevalence():
    labels = bits("0011000100")
    missing = bits("1000000000")
    assert auc(GroundTruth(labels, missing), np.ones(10)) == pytest.approx(3 / 9, abs=1e-15)


def test_auc_requires_anomalies():
    with pytest.raises(ValueError):
        auc(GroundTruth(np.zeros(4, bool)), np.arange(4.0))


def test_alert_delay():
    truth = GroundTruth(bits("0110001110"))
    scores = np.array([0, 0, 1, 0, 0, 0, 1, 0, 0, 0], float)
    assert alert_delays(truth, scores, 1.0) == [1, 0]
    scores[6] = 0.0
    assert alert_delays(truth, scores, 1.0) == [1, None]


def test_adjustment_never_hurts():
    rng = np.random.default_rng(1)
    for _ in range(50):
        labels, missing, scores = random_case(rng)
        truth = GroundTruth(labels, missing)
        ok = ~missing & ~np.isnan(scores)
        if not ok.any():
            continue
        best = best_fscore(truth, scores)[0]
        for c in np.unique(scores[ok]):
            raw = ok & (scores >= c)
            tp, fp = np.sum(raw & labels), np.sum(raw & ~labels)
            pos = np.sum(labels & ok)
            p, r, f = prf_at_threshold(truth, scores, c)
            assert r >= (tp / pos if pos else 1.0)
            assert p >= (tp / (tp + fp) if tp + fp else 1.0)
            assert best >= f


def test_evaluate_report(tmp_path):
    truth = GroundTruth(bits("0110001110"))
    scores = np.array([np.nan, 0.2, 0.9, 0.1, 0.3, 0.0, 0.8, 0.7, 0.7, 0.2])
    rep = evaluate(truth, scores)
    assert isinstance(rep, EvalReport)
    assert rep.best_f_score == 1.0 and rep.best_threshold == 0.7
    assert rep.alert_delays == [1, 0]
    assert rep.best_f_score == rep.fscore.max()
    assert "best_f_score: 1.000000" in rep.summary()
    path = tmp_path / "thr.csv"
    rep.write_threshold_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "threshold,precision,recall,fscore"
    assert lines[-1].startswith("inf,1.0,0.0,0.0")
