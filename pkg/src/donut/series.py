"""KPI series ingestion, standardization, windowing and label handling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

STD_TOLERANCE = 1e-8


class SeriesError(ValueError):
    """Raised for malformed or degenerate input series."""


@dataclass
class RawSeries:
    """A KPI as recorded: integer timestamps, values with NaN for missing, 0/1 labels."""

    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.labels is None:
            self.labels = np.zeros(len(self.values), dtype=np.int8)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if not (len(self.timestamps) == len(self.values) == len(self.labels)):
            raise SeriesError("timestamps, values and labels must have equal length")

    @property
    def interval(self) -> int:
        return check_interval(self.timestamps)


@dataclass
class PreparedSeries:
    """Standardized series; missing slots hold exactly 0."""

    values: np.ndarray
    missing_mask: np.ndarray
    anomaly_mask: np.ndarray
    mean: float
    std: float
    interval: int = 60
    timestamps: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.values)

    @property
    def normal_mask(self) -> np.ndarray:
        return (self.missing_mask == 0) & (self.anomaly_mask == 0)

    def raw_values(self) -> np.ndarray:
        """Undo the standardization; missing slots become NaN."""
        out = self.values * self.std + self.mean
        out[self.missing_mask.astype(bool)] = np.nan
        return out

    def copy(self) -> "PreparedSeries":
        return replace(
            self,
            values=self.values.copy(),
            missing_mask=self.missing_mask.copy(),
            anomaly_mask=self.anomaly_mask.copy(),
            timestamps=None if self.timestamps is None else self.timestamps.copy(),
        )


@dataclass
class Window:
    x: np.ndarray
    alpha: np.ndarray
    beta: float
    last_index: int


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float = 0.49
    valid_ratio: float = 0.21
    test_ratio: float = 0.30

    def __post_init__(self):
        ratios = (self.train_ratio, self.valid_ratio, self.test_ratio)
        if min(ratios) < 0 or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
            raise SeriesError(f"split ratios must be nonnegative and sum to 1, got {ratios}")


def check_interval(timestamps: np.ndarray) -> int:
    if len(timestamps) < 2:
        return 60
    diffs = np.diff(timestamps)
    if diffs[0] <= 0 or np.any(diffs != diffs[0]):
        raise SeriesError("timestamps must be strictly increasing with a constant interval")
    return int(diffs[0])


def prepare(raw: RawSeries, stats: tuple[float, float] | None = None) -> PreparedSeries:
    """Standardize a raw series and zero-fill its missing points.

    Statistics are taken over points that are neither missing nor labeled
    anomalies unless ``stats = (mean, std)`` is supplied.
    """
    interval = check_interval(raw.timestamps)
    missing = np.isnan(raw.values)
    anomaly = raw.labels.astype(bool)
    if stats is None:
        normal = raw.values[~missing & ~anomaly]
        if len(normal) < 2:
            raise SeriesError("need at least 2 normal points to compute statistics")
        mean, std = float(np.mean(normal)), float(np.std(normal))
    else:
        mean, std = float(stats[0]), float(stats[1])
    if std < STD_TOLERANCE:
        raise SeriesError("constant series")
    values = np.where(missing, 0.0, (np.nan_to_num(raw.values) - mean) / std)
    return PreparedSeries(
        values=values,
        missing_mask=missing.astype(np.int8),
        anomaly_mask=anomaly.astype(np.int8),
        mean=mean,
        std=std,
        interval=interval,
        timestamps=raw.timestamps.copy(),
    )


def restandardize(series: PreparedSeries, stats: tuple[float, float] | None = None) -> PreparedSeries:
    """Re-run :func:`prepare` on a prepared series, e.g. with another split's statistics."""
    ts = series.timestamps
    if ts is None:
        ts = np.arange(len(series), dtype=np.int64) * series.interval
    raw = RawSeries(ts, series.raw_values(), series.anomaly_mask)
    out = prepare(raw, stats)
    out.interval = series.interval
    return out


def window_matrix(series: PreparedSeries, W: int) -> tuple[np.ndarray, np.ndarray]:
    """All sliding windows as ``(x, alpha)`` arrays of shape (N-W+1, W).

    Rows are read-only views; copy before writing.
    """
    if W < 1:
        raise SeriesError("window size must be >= 1")
    if len(series) < W:
        raise SeriesError(f"series of length {len(series)} is shorter than window size {W}")
    x = np.lib.stride_tricks.sliding_window_view(series.values, W)
    alpha = np.lib.stride_tricks.sliding_window_view(series.normal_mask.astype(np.float64), W)
    return x, alpha


def make_windows(series: PreparedSeries, W: int) -> list[Window]:
    x, alpha = window_matrix(series, W)
    out = []
    for i in range(len(x)):
        a = alpha[i].copy()
        out.append(Window(x=x[i].copy(), alpha=a, beta=float(a.sum()) / W, last_index=i + W - 1))
    return out


def count_windows(n_points: int, W: int) -> int:
    if n_points < W:
        raise SeriesError(f"series of length {n_points} is shorter than window size {W}")
    return n_points - W + 1


def inject_missing(series: PreparedSeries, lam: float, rng: np.random.Generator):
    """Copy of ``series`` with round(lam * n_eligible) normal points turned missing.

    Returns ``(copy, injected_indices)``; indices are sorted.
    """
    if not 0 <= lam < 1:
        raise SeriesError("injection ratio must lie in [0, 1)")
    out = series.copy()
    eligible = np.flatnonzero(series.normal_mask)
    n = int(round(lam * len(eligible)))
    if n == 0:
        return out, np.empty(0, dtype=np.int64)
    idx = np.sort(rng.choice(eligible, size=n, replace=False))
    out.values[idx] = 0.0
    out.missing_mask[idx] = 1
    return out, idx


def segments(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of ones as half-open ``(start, stop)`` pairs."""
    m = np.concatenate([[0], np.asarray(mask, dtype=np.int8) != 0, [0]]).astype(np.int8)
    d = np.diff(m)
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1)
    return list(zip(starts.tolist(), stops.tolist()))


def downsample_labels(series: PreparedSeries, keep_ratio: float, rng: np.random.Generator) -> PreparedSeries:
    """Drop whole anomaly segments, picked with probability proportional to length,
    until at most ``keep_ratio`` of the labeled points remain."""
    if not 0 <= keep_ratio <= 1:
        raise SeriesError("keep_ratio must lie in [0, 1]")
    out = series.copy()
    segs = segments(series.anomaly_mask)
    total = sum(b - a for a, b in segs)
    target = keep_ratio * total
    remaining = total
    while remaining > target and segs:
        lengths = np.array([b - a for a, b in segs], dtype=np.float64)
        k = int(rng.choice(len(segs), p=lengths / lengths.sum()))
        a, b = segs.pop(k)
        out.anomaly_mask[a:b] = 0
        remaining -= b - a
    return out


def split(series: PreparedSeries, spec: SplitSpec = SplitSpec()):
    """Chronological train/valid/test split; valid and test reuse train statistics."""
    n = len(series)
    n_train = int(math.floor(n * spec.train_ratio))
    n_valid = int(math.floor(n * spec.valid_ratio))
    bounds = [(0, n_train), (n_train, n_train + n_valid), (n_train + n_valid, n)]
    parts = [_slice(series, a, b) for a, b in bounds]
    train = restandardize(parts[0])
    stats = (train.mean, train.std)
    return train, restandardize(parts[1], stats), restandardize(parts[2], stats)


def _slice(series: PreparedSeries, a: int, b: int) -> PreparedSeries:
    ts = series.timestamps
    if ts is None:
        ts = np.arange(len(series), dtype=np.int64) * series.interval
    return PreparedSeries(
        values=series.values[a:b].copy(),
        missing_mask=series.missing_mask[a:b].copy(),
        anomaly_mask=series.anomaly_mask[a:b].copy(),
        mean=series.mean,
        std=series.std,
        interval=series.interval,
        timestamps=ts[a:b].copy(),
    )


def smoothness_stat(series: PreparedSeries) -> float:
    """Mean absolute first difference (normalized by N-1), skipping pairs with a missing point."""
    if len(series) < 2:
        raise SeriesError("need at least 2 points")
    v = series.values
    present = series.missing_mask == 0
    ok = present[1:] & present[:-1]
    if not ok.any():
        raise SeriesError("every consecutive pair touches a missing point")
    return float(np.abs(np.diff(v))[ok].sum() / (len(v) - 1))


# --- CSV -------------------------------------------------------------------

def read_csv(path: str | Path) -> RawSeries:
    """Read ``timestamp,value,label`` rows; gaps that are whole multiples of
    the interval are filled with missing slots."""
    ts, vals, labels = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["timestamp", "value"]:
            raise SeriesError(f"{path}: line 1: expected header 'timestamp,value,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = int(row[0])
                v = row[1].strip() if len(row) > 1 else ""
                value = float(v) if v else math.nan
                lab = row[2].strip() if len(row) > 2 else ""
                label = int(lab) if lab else 0
            except (ValueError, IndexError) as exc:
                raise SeriesError(f"{path}: line {lineno}: malformed row {row!r}") from exc
            if label not in (0, 1):
                raise SeriesError(f"{path}: line {lineno}: label must be 0, 1 or empty")
            if ts and t <= ts[-1]:
                raise SeriesError(f"{path}: line {lineno}: timestamps must be increasing")
            ts.append(t)
            vals.append(value)
            labels.append(label)
    if not ts:
        raise SeriesError(f"{path}: no data rows")
    return fill_gaps(np.array(ts), np.array(vals), np.array(labels))


def fill_gaps(ts: np.ndarray, values: np.ndarray, labels: np.ndarray) -> RawSeries:
    if len(ts) < 2:
        return RawSeries(ts, values, labels)
    diffs = np.diff(ts)
    step = int(diffs.min())
    if np.any(diffs % step):
        raise SeriesError("timestamp gaps are not multiples of the sampling interval")
    full = np.arange(ts[0], ts[-1] + step, step, dtype=np.int64)
    pos = (ts - ts[0]) // step
    v = np.full(len(full), np.nan)
    lab = np.zeros(len(full), dtype=np.int8)
    v[pos] = values
    lab[pos] = labels
    return RawSeries(full, v, lab)


def write_csv(path: str | Path, raw: RawSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "value", "label"])
        for t, v, lab in zip(raw.timestamps, raw.values, raw.labels):
            w.writerow([int(t), "" if math.isnan(v) else repr(float(v)), int(lab)])
