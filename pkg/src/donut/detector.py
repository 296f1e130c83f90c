"""Anomaly scoring: MCMC imputation of missing points and reconstruction probability."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gaussian_net as gn
from .series import PreparedSeries, SeriesError, window_matrix


@dataclass
class DetectConfig:
    mcmc_iters: int = 10
    mc_samples: int = 1024
    seed: int = 0
    use_mcmc: bool = True
    use_prior: bool = False
    chunk: int = 32

    def __post_init__(self):
        if self.mcmc_iters < 0 or self.mc_samples < 1:
            raise ValueError("mcmc_iters must be >= 0 and mc_samples >= 1")


def window_streams(seed: int, t: int):
    """Independent (mcmc, scoring) generators for the window ending at ``t``."""
    return np.random.default_rng([seed, t, 1]), np.random.default_rng([seed, t, 0])


def mcmc_impute(x, missing_mask, params: gn.ModelParams, M: int, rng) -> np.ndarray:
    """Resample the missing coordinates of one window ``M`` times through the model.

    Each iteration draws one z from q(z|x) and one reconstruction sample from
    p(x|z); observed coordinates are never touched.
    """
    out = _mcmc_batch(np.asarray(x, dtype=np.float64)[None, :],
                      np.asarray(missing_mask, dtype=bool)[None, :], params, M, [rng])
    return out[0]


def _mcmc_batch(x, missing, params, M, rngs):
    x = x.copy()
    if M == 0 or not missing.any():
        return x
    B, K, W = len(x), params.K, params.W
    # draws are taken per window so a window's result does not depend on batching
    draws = [(r.standard_normal((M, K)), r.standard_normal((M, W))) for r in rngs]
    xi = np.stack([d[0] for d in draws], axis=1)
    noise = np.stack([d[1] for d in draws], axis=1)
    for m in range(M):
        z = gn.reparameterize(gn.encode(x, params), xi[m])
        px = gn.decode(z, params)
        sample = px.mu + noise[m] * px.sigma
        x = np.where(missing, sample, x)
    return x.reshape(B, W)


def _last_point_log_density(x, params, xi_or_z, from_prior: bool):
    """Mean over samples of log p(x_last | z) for a batch of windows.

    ``xi_or_z`` has shape (B, L, K): standard normal draws that are either
    pushed through q(z|x) or used directly as prior samples.
    """
    B, L, K = xi_or_z.shape
    if from_prior:
        z = xi_or_z
    else:
        q = gn.encode(x, params)
        z = q.mu[:, None, :] + xi_or_z * q.sigma[:, None, :]
    px = gn.decode_last(z.reshape(B * L, K), params)
    ll = gn.log_normal(np.repeat(x[:, -1], L), px.mu, px.sigma)
    return ll.reshape(B, L).mean(axis=1)


def reconstruction_score(x, params: gn.ModelParams, L: int, rng) -> float:
    """Anomaly score of the last point: minus its MC reconstruction log-probability."""
    x = np.asarray(x, dtype=np.float64)[None, :]
    xi = rng.standard_normal((L, params.K))[None]
    return -float(_last_point_log_density(x, params, xi, from_prior=False)[0])


def prior_score(x, params: gn.ModelParams, L: int, rng) -> float:
    """As :func:`reconstruction_score` but with z drawn from the N(0, I) prior."""
    x = np.asarray(x, dtype=np.float64)[None, :]
    z = rng.standard_normal((L, params.K))[None]
    return -float(_last_point_log_density(x, params, z, from_prior=True)[0])


def detect(series: PreparedSeries, params: gn.ModelParams, cfg: DetectConfig = DetectConfig()):
    """Per-point anomaly scores (NaN where unscored: the first W-1 points and missing points).

    Each window draws from its own generator seeded by ``(cfg.seed, t)``, so
    the random draws do not depend on chunking or evaluation order (matrix
    products may still round differently for different chunk sizes).
    """
    W = params.W
    if len(series) < W:
        raise SeriesError(f"series of length {len(series)} is shorter than window size {W}")
    x_all, _ = window_matrix(series, W)
    missing_all = np.lib.stride_tricks.sliding_window_view(series.missing_mask.astype(bool), W)
    scores = np.full(len(series), np.nan)
    ends = np.arange(W - 1, len(series))
    ends = ends[series.missing_mask[ends] == 0]
    L = cfg.mc_samples
    for a in range(0, len(ends), cfg.chunk):
        t = ends[a:a + cfg.chunk]
        rows = t - (W - 1)
        x = x_all[rows].copy()
        streams = [window_streams(cfg.seed, int(ti)) for ti in t]
        if cfg.use_mcmc and not cfg.use_prior:
            miss = missing_all[rows]
            need = np.flatnonzero(miss.any(axis=1))
            if len(need):
                x[need] = _mcmc_batch(x[need], miss[need], params, cfg.mcmc_iters,
                                      [streams[i][0] for i in need])
        draws = np.stack([s[1].standard_normal((L, params.K)) for s in streams])
        scores[t] = -_last_point_log_density(x, params, draws, from_prior=cfg.use_prior)
    return scores


def write_scores(path: str | Path, timestamps, scores) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "score"])
        for t, s in zip(timestamps, scores):
            w.writerow([int(t), "" if np.isnan(s) else repr(float(s))])


def read_scores(path: str | Path):
    ts, sc = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "score"]:
            raise SeriesError(f"{path}: line 1: expected header 'timestamp,score'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ts.append(int(row[0]))
                sc.append(float(row[1]) if len(row) > 1 and row[1].strip() else np.nan)
            except ValueError as exc:
                raise SeriesError(f"{path}: line {lineno}: malformed row {row!r}") from exc
    return np.array(ts, dtype=np.int64), np.array(sc)
