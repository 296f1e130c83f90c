"""Segment-adjusted precision, recall, F-score, average precision and alert delay.

A point is *evaluable* when it carries a score and is not missing.  Detecting
any evaluable point of a ground-truth anomaly segment counts the whole
segment (all its evaluable points) as detected.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .series import segments


@dataclass
class GroundTruth:
    anomaly_mask: np.ndarray
    missing_mask: np.ndarray | None = None

    def __post_init__(self):
        self.anomaly_mask = np.asarray(self.anomaly_mask, dtype=bool)
        if self.missing_mask is None:
            self.missing_mask = np.zeros_like(self.anomaly_mask)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)

    @property
    def segments(self) -> list[tuple[int, int]]:
        return segments(self.anomaly_mask)


@dataclass
class EvalReport:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    fscore: np.ndarray
    best_f_score: float
    best_threshold: float
    auc: float
    alert_delays: list[int | None] = field(default_factory=list)

    @property
    def mean_alert_delay(self) -> float:
        d = [x for x in self.alert_delays if x is not None]
        return float(np.mean(d)) if d else float("nan")

    def summary(self) -> str:
        detected = sum(d is not None for d in self.alert_delays)
        return "\n".join([
            f"best_f_score: {self.best_f_score:.6f}",
            f"best_threshold: {self.best_threshold!r}",
            f"auc: {self.auc:.6f}",
            f"segments_detected: {detected}/{len(self.alert_delays)}",
            f"mean_alert_delay: {self.mean_alert_delay:.3f}",
        ])

    def write_threshold_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "precision", "recall", "fscore"])
            for row in zip(self.thresholds, self.precision, self.recall, self.fscore):
                w.writerow([repr(float(v)) for v in row])


def evaluable(truth: GroundTruth, scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    return ~np.isnan(scores) & ~truth.missing_mask


def adjust(truth: GroundTruth, raw_flags) -> np.ndarray:
    """Spread each detection over its whole truth segment; non-evaluable points stay 0.

    ``raw_flags`` may hold NaN/-1 or be masked by the caller; only evaluable
    positions (not missing) are honoured.
    """
    flags = np.asarray(raw_flags, dtype=bool) & ~truth.missing_mask
    out = flags.copy()
    for a, b in truth.segments:
        if flags[a:b].any():
            out[a:b] = ~truth.missing_mask[a:b]
    return out


def _rates(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


def prf_at_threshold(truth: GroundTruth, scores, threshold: float):
    """Adjusted (precision, recall, F) with flags = score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    ok = evaluable(truth, scores)
    flags = np.zeros(len(scores), dtype=bool)
    flags[ok] = scores[ok] >= threshold
    adj = adjust(truth, flags)
    pos = truth.anomaly_mask & ok
    tp = int(np.sum(adj & pos))
    fp = int(np.sum(adj & ok & ~truth.anomaly_mask))
    fn = int(np.sum(pos)) - tp
    return _rates(tp, fp, fn)


def threshold_table(truth: GroundTruth, scores):
    """Adjusted P/R/F at every candidate threshold (distinct scores, ascending, then +inf).

    A segment is detected at threshold ``c`` iff its largest evaluable score is
    >= ``c``, which makes the sweep a pair of sorted-count lookups.
    """
    scores = np.asarray(scores, dtype=np.float64)
    ok = evaluable(truth, scores)
    cand = np.append(np.unique(scores[ok]), np.inf)
    normal = np.sort(scores[ok & ~truth.anomaly_mask])
    seg_max, seg_len = [], []
    for a, b in truth.segments:
        m = ok[a:b]
        if m.any():
            seg_max.append(scores[a:b][m].max())
            seg_len.append(int(m.sum()))
    order = np.argsort(seg_max)
    seg_max = np.asarray(seg_max, dtype=np.float64)[order]
    seg_cum = np.concatenate([[0], np.cumsum(np.asarray(seg_len, dtype=np.int64)[order])])
    n_pos = int(seg_cum[-1])
    fp = len(normal) - np.searchsorted(normal, cand, side="left")
    tp = n_pos - seg_cum[np.searchsorted(seg_max, cand, side="left")]
    rows = [_rates(int(t), int(f), n_pos - int(t)) for t, f in zip(tp, fp)]
    p, r, f = (np.array(c, dtype=np.float64) for c in zip(*rows))
    return cand, p, r, f


def best_fscore(truth: GroundTruth, scores):
    """Best adjusted F over all thresholds; ties go to the smallest threshold."""
    cand, p, r, f = threshold_table(truth, scores)
    k = int(np.argmax(f))
    return float(f[k]), float(cand[k]), (cand, p, r, f)


def auc(truth: GroundTruth, scores) -> float:
    """Average precision: sum of (R_i - R_{i-1}) * P_i over descending thresholds."""
    ok = evaluable(truth, scores)
    if not np.any(truth.anomaly_mask & ok):
        raise ValueError("no evaluable anomaly points")
    cand, p, r, _ = threshold_table(truth, scores)
    p, r = p[::-1], r[::-1]
    prev = np.concatenate([[0.0], r[:-1]])
    # correctly rounded sum, independent of summation order
    return math.fsum((r - prev) * p)


def alert_delays(truth: GroundTruth, scores, threshold: float) -> list[int | None]:
    """Per segment: index of the first raw flag minus the segment start, or None."""
    scores = np.asarray(scores, dtype=np.float64)
    ok = evaluable(truth, scores)
    flags = np.zeros(len(scores), dtype=bool)
    flags[ok] = scores[ok] >= threshold
    out = []
    for a, b in truth.segments:
        hit = np.flatnonzero(flags[a:b])
        out.append(int(hit[0]) if len(hit) else None)
    return out


def evaluate(truth: GroundTruth, scores) -> EvalReport:
    best, thr, (cand, p, r, f) = best_fscore(truth, scores)
    ok = evaluable(truth, scores)
    ap = auc(truth, scores) if np.any(truth.anomaly_mask & ok) else float("nan")
    delays = [d for d, (a, b) in zip(alert_delays(truth, scores, thr), truth.segments)
              if ok[a:b].any()]
    return EvalReport(cand, p, r, f, best, thr, ap, delays)
