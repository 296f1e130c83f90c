"""Experiment plumbing: dataset preparation, latent-space export and the
technique ablation (baseline VAE vs. masked ELBO, injection and MCMC)."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gaussian_net as gn
from .detector import DetectConfig, detect
from .metrics import GroundTruth, auc, best_fscore
from .series import (PreparedSeries, RawSeries, SplitSpec, downsample_labels, prepare,
                     restandardize, split, window_matrix)
from .training import TrainConfig, train


@dataclass
class Dataset:
    """Train/valid/test splits standardized with train statistics.

    ``train`` and ``valid`` carry the (possibly down-sampled) training labels;
    ``truth`` holds the full test labels used for evaluation.
    """

    train: PreparedSeries
    valid: PreparedSeries
    test: PreparedSeries
    truth: GroundTruth
    retained_labels: int = 0


def make_dataset(raw: RawSeries, label_ratio: float = 0.0, seed: int = 0,
                 spec: SplitSpec = SplitSpec()) -> Dataset:
    """Split chronologically, keep ``label_ratio`` of train/valid labels, restandardize."""
    tr, va, te = split(prepare(raw), spec)
    rng = np.random.default_rng(seed)
    tr = downsample_labels(tr, label_ratio, rng)
    va = downsample_labels(va, label_ratio, rng)
    tr = restandardize(tr)
    stats = (tr.mean, tr.std)
    va, te = restandardize(va, stats), restandardize(te, stats)
    truth = GroundTruth(te.anomaly_mask.copy(), te.missing_mask.copy())
    # the detector never sees test labels
    te.anomaly_mask[:] = 0
    return Dataset(tr, va, te, truth, int(tr.anomaly_mask.sum()))


def abnormal_window_fraction(series: PreparedSeries, W: int) -> float:
    """Share of windows holding at least one missing or labeled-anomaly point."""
    _, alpha = window_matrix(series, W)
    return float(np.mean(alpha.min(axis=1) < 1))


def add_missing_bursts(series: PreparedSeries, W: int, target: float, rng,
                       burst=(1, 10)) -> PreparedSeries:
    """Blank out random bursts of normal points until ``target`` of windows are abnormal.

    Returns a copy; a series already at or above the target comes back unchanged.
    """
    out = series.copy()
    while abnormal_window_fraction(out, W) < target:
        d = int(rng.integers(burst[0], burst[1] + 1))
        a = int(rng.integers(0, len(out) - d + 1))
        if not out.normal_mask[a:a + d].all():
            continue
        out.missing_mask[a:a + d] = 1
        out.values[a:a + d] = 0.0
    return out


# --- latent space -------------------------------------------------------------

def export_latent(series: PreparedSeries, params: gn.ModelParams, chunk: int = 4096):
    """Posterior mean and std of every window.

    Returns ``(last_index, time_of_day, mu_z, sigma_z)``; ``time_of_day`` is in
    seconds since midnight UTC of the window's last timestamp.
    """
    x, _ = window_matrix(series, params.W)
    mus, sigmas = [], []
    for a in range(0, len(x), chunk):
        q = gn.encode(x[a:a + chunk], params)
        mus.append(q.mu)
        sigmas.append(q.sigma)
    last = np.arange(params.W - 1, len(series))
    ts = series.timestamps if series.timestamps is not None else np.arange(len(series)) * series.interval
    return last, np.asarray(ts)[last] % 86400, np.vstack(mus), np.vstack(sigmas)


def write_latent_csv(path: str | Path, latent) -> None:
    last, tod, mu, sigma = latent
    K = mu.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["last_index", "time_of_day"] + [f"mu_z{k}" for k in range(K)]
                   + [f"sigma_z{k}" for k in range(K)])
        for i in range(len(last)):
            w.writerow([int(last[i]), int(tod[i])] + [repr(float(v)) for v in mu[i]]
                       + [repr(float(v)) for v in sigma[i]])


def time_gradient_ratio(mu: np.ndarray, n_pairs: int = 10000, seed: int = 0) -> tuple[float, float]:
    """(mean distance between adjacent posterior means, mean distance over random pairs)."""
    adjacent = float(np.mean(np.linalg.norm(np.diff(mu, axis=0), axis=1)))
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(mu), n_pairs)
    j = rng.integers(0, len(mu), n_pairs)
    rand = float(np.mean(np.linalg.norm(mu[i] - mu[j], axis=1)))
    return adjacent, rand


# --- ablation -----------------------------------------------------------------

@dataclass(frozen=True)
class Variant:
    name: str
    mode: str
    injection: bool
    mcmc: bool


VARIANTS = (
    Variant("vae_baseline", "vae_baseline", False, False),
    Variant("m_elbo", "donut", False, False),
    Variant("m_elbo+injection", "donut", True, False),
    Variant("m_elbo+mcmc", "donut", False, True),
    Variant("all_three", "donut", True, True),
)


@dataclass
class AblationRow:
    variant: str
    seed: int
    mode: str
    injection_lambda: float
    use_mcmc: bool
    best_f_score: float
    auc: float


def run_ablation(data: Dataset, base: TrainConfig, detect_cfg: DetectConfig = DetectConfig(),
                 seeds=(0,), variants=VARIANTS, cache: dict | None = None) -> list[AblationRow]:
    """Train and score every variant for every seed.

    Variants differ only in their technique flags; variants that share a
    trained model (same mode and injection) reuse it.  ``cache`` may be
    supplied to share trained models across calls.
    """
    lam = base.injection_lambda if base.injection_lambda > 0 else 0.01
    models = {} if cache is None else cache
    rows = []
    for seed in seeds:
        for v in variants:
            cfg = dataclasses.replace(base, mode=v.mode, seed=seed,
                                      injection_lambda=lam if v.injection else 0.0)
            key = (v.mode, cfg.injection_lambda, seed)
            if key not in models:
                models[key] = train(data.train, data.valid, cfg)[0]
            dcfg = dataclasses.replace(detect_cfg, use_mcmc=v.mcmc, seed=seed)
            scores = detect(data.test, models[key], dcfg)
            f, _, _ = best_fscore(data.truth, scores)
            rows.append(AblationRow(v.name, seed, v.mode, cfg.injection_lambda, v.mcmc, f,
                                    auc(data.truth, scores)))
    return rows


def summarize_ablation(rows: list[AblationRow]) -> dict[str, tuple[float, float]]:
    """Mean best F-score and mean AUC per variant, in first-seen order."""
    out = {}
    for name in dict.fromkeys(r.variant for r in rows):
        sel = [r for r in rows if r.variant == name]
        out[name] = (float(np.mean([r.best_f_score for r in sel])),
                     float(np.mean([r.auc for r in sel])))
    return out


def write_ablation_csv(path: str | Path, rows: list[AblationRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in dataclasses.fields(AblationRow)])
        for r in rows:
            w.writerow(dataclasses.astuple(r))
