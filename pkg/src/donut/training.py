"""Masked-ELBO objective, optimizer pieces and the training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import gaussian_net as gn
from .series import PreparedSeries, Window, inject_missing, window_matrix

log = logging.getLogger(__name__)

MODES = ("donut", "vae_baseline")


@dataclass
class TrainConfig:
    W: int = 120
    K: int = 3
    hidden: int = 100
    epsilon: float = 1e-4
    batch_size: int = 256
    epochs: int = 250
    initial_lr: float = 1e-3
    lr_discount: float = 0.75
    lr_every: int = 10
    l2_coeff: float = 1e-3
    clip_norm: float = 10.0
    injection_lambda: float = 0.01
    mc_samples_train: int = 1
    seed: int = 0
    early_stop: bool = True
    mode: str = "donut"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_size < 1 or self.mc_samples_train < 1 or self.epochs < 0:
            raise ValueError("batch_size and mc_samples_train must be >= 1, epochs >= 0")
        if not 0 <= self.injection_lambda < 1:
            raise ValueError("injection_lambda must lie in [0, 1)")


@dataclass
class ElboTerms:
    recon: float
    prior: float
    entropy: float

    @property
    def total(self) -> float:
        return self.recon + self.prior + self.entropy


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def fresh(cls, params: gn.ModelParams) -> "AdamState":
        return cls({k: np.zeros_like(t) for k, t in params.tensors.items()},
                   {k: np.zeros_like(t) for k, t in params.tensors.items()})


@dataclass
class TraceRow:
    epoch: int
    lr: float
    train_m_elbo: float
    valid_m_elbo: float
    recon: float
    prior: float
    entropy: float


@dataclass
class TrainingTrace:
    rows: list[TraceRow] = field(default_factory=list)
    best_epoch: int | None = None
    n_train_windows: int = 0
    retained_labels: int | None = None

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            if self.retained_labels is not None:
                fh.write(f"# retained_labels={self.retained_labels}\n")
            fh.write(f"# train_windows={self.n_train_windows} best_epoch={self.best_epoch}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(TraceRow.__dataclass_fields__))
            for row in self.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(row).values()])


# --- objective ----------------------------------------------------------------

def m_elbo_estimate(window: Window, params: gn.ModelParams, xi_samples) -> float:
    """Monte Carlo masked ELBO of one window, averaged over the rows of ``xi_samples``."""
    return elbo_decomposition(window, params, xi_samples).total


def elbo_decomposition(window: Window, params: gn.ModelParams, xi_samples) -> ElboTerms:
    """Separate MC estimates of the reconstruction, scaled prior and entropy terms.

    ``xi_samples`` is an (L, K) matrix of standard normal draws, or an integer L
    together with the default generator (seed 0).
    """
    if np.isscalar(xi_samples):
        xi_samples = np.random.default_rng(0).standard_normal((int(xi_samples), params.K))
    xi = np.atleast_2d(np.asarray(xi_samples, dtype=np.float64))
    L = xi.shape[0]
    x = np.broadcast_to(window.x, (L, params.W))
    alpha = np.broadcast_to(window.alpha, (L, params.W))
    recon, prior, entropy = gn.m_elbo_terms(x, alpha, xi, params, beta=window.beta)
    return ElboTerms(float(recon.mean()), float(prior.mean()), float(entropy.mean()))


def batch_loss(x, alpha, xi, params: gn.ModelParams) -> float:
    """Mean negative masked ELBO over a batch; same arithmetic as :func:`gn.backward`."""
    recon, prior, entropy = gn.m_elbo_terms(x, alpha, xi, params)
    return -float(np.mean(recon + prior + entropy))


# --- optimizer ----------------------------------------------------------------

def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    return cfg.initial_lr * cfg.lr_discount ** (epoch // cfg.lr_every)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], limit: float) -> dict[str, np.ndarray]:
    if limit <= 0:
        raise ValueError("clip limit must be positive")
    norm = global_norm(grads)
    if norm <= limit:
        return grads
    scale = limit / norm
    return {k: g * scale for k, g in grads.items()}


def add_l2(grads: dict[str, np.ndarray], params: gn.ModelParams, coeff: float):
    """Gradient of 0.5 * coeff * ||w||^2 over hidden-layer weights (not biases, not heads)."""
    if coeff == 0:
        return grads
    out = dict(grads)
    for name in gn.HIDDEN_WEIGHTS:
        out[name] = grads[name] + coeff * params[name]
    return out


def l2_penalty(params: gn.ModelParams, coeff: float) -> float:
    return 0.5 * coeff * sum(float(np.sum(params[n] ** 2)) for n in gn.HIDDEN_WEIGHTS)


def adam_step(params: gn.ModelParams, grads, state: AdamState, lr: float,
              l2_coeff: float = 0.0, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    grads = add_l2(grads, params, l2_coeff)
    step = state.step + 1
    m, v, tensors = {}, {}, {}
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for name, w in params.tensors.items():
        g = grads[name]
        m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        tensors[name] = w - lr * (m[name] / c1) / (np.sqrt(v[name] / c2) + eps)
    return params.with_tensors(tensors), AdamState(m, v, step)


# --- training loop ------------------------------------------------------------

def _streams(seed: int):
    init, inject, shuffle, noise, valid = np.random.SeedSequence(seed).spawn(5)
    return (np.random.default_rng(init), np.random.default_rng(inject),
            np.random.default_rng(shuffle), np.random.default_rng(noise),
            np.random.default_rng(valid))


def _clean_rows(alpha: np.ndarray) -> np.ndarray:
    return np.flatnonzero(alpha.min(axis=1) == 1.0)


def validation_m_elbo(x, alpha, params, rng, L: int = 1, chunk: int = 4096):
    """Mean masked-ELBO terms over all windows of ``(x, alpha)``."""
    sums = np.zeros(3)
    for a in range(0, len(x), chunk):
        xb, ab = x[a:a + chunk], alpha[a:a + chunk]
        for _ in range(L):
            xi = rng.standard_normal((len(xb), params.K))
            terms = gn.m_elbo_terms(xb, ab, xi, params)
            sums += [t.sum() for t in terms]
    recon, prior, entropy = sums / (len(x) * L)
    return ElboTerms(float(recon), float(prior), float(entropy))


def train(train_series: PreparedSeries, valid_series: PreparedSeries | None,
          cfg: TrainConfig, params: gn.ModelParams | None = None):
    """Fit a model; returns ``(params, trace)``.

    In ``donut`` mode every epoch trains on a fresh copy of the series with
    ``injection_lambda`` of its normal points turned missing.  In
    ``vae_baseline`` mode windows holding any missing or labeled-anomaly point
    are dropped and there is no injection.
    """
    W = cfg.W
    init_rng, inject_rng, shuffle_rng, noise_rng, valid_rng = _streams(cfg.seed)
    if params is None:
        params = gn.init_params(W, cfg.K, init_rng, cfg.hidden, cfg.epsilon)
    params.mean, params.std = train_series.mean, train_series.std

    x_all, alpha_all = window_matrix(train_series, W)
    baseline = cfg.mode == "vae_baseline"
    rows = _clean_rows(alpha_all) if baseline else np.arange(len(x_all))
    if len(rows) == 0:
        raise ValueError("no usable training windows")
    trace = TrainingTrace(n_train_windows=len(rows))

    if valid_series is not None:
        vx, valpha = window_matrix(valid_series, W)
        if baseline:
            keep = _clean_rows(valpha)
            vx, valpha = vx[keep], valpha[keep]
    state = AdamState.fresh(params)
    best = None

    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        if baseline or cfg.injection_lambda == 0:
            x_ep, alpha_ep = x_all, alpha_all
        else:
            injected, _ = inject_missing(train_series, cfg.injection_lambda, inject_rng)
            x_ep, alpha_ep = window_matrix(injected, W)
        order = rows[shuffle_rng.permutation(len(rows))]
        total = 0.0
        for a in range(0, len(order), cfg.batch_size):
            idx = order[a:a + cfg.batch_size]
            xb, ab = x_ep[idx], alpha_ep[idx]
            loss, grads = _batch_grads(xb, ab, params, noise_rng, cfg.mc_samples_train)
            total += loss * len(idx)
            grads = add_l2(grads, params, cfg.l2_coeff)
            grads = clip_gradients(grads, cfg.clip_norm)
            params, state = adam_step(params, grads, state, lr)
        train_elbo = -total / len(order)

        if valid_series is not None:
            terms = validation_m_elbo(vx, valpha, params, valid_rng)
        else:
            terms = ElboTerms(np.nan, np.nan, np.nan)
        trace.rows.append(TraceRow(epoch, lr, train_elbo, terms.total,
                                   terms.recon, terms.prior, terms.entropy))
        log.debug("epoch %d lr %.3g train %.4f valid %.4f", epoch, lr, train_elbo, terms.total)
        if cfg.early_stop and valid_series is not None and np.isfinite(terms.total):
            if best is None or terms.total > best[0]:
                best = (terms.total, epoch, params.copy())

    if best is not None:
        trace.best_epoch = best[1]
        params = best[2]
    elif trace.rows:
        trace.best_epoch = trace.rows[-1].epoch
    return params, trace


def _batch_grads(xb, ab, params, rng, L):
    if L == 1:
        return gn.backward(xb, ab, None, rng.standard_normal((len(xb), params.K)), params)
    # L samples: average of L single-sample estimates
    loss, grads = 0.0, None
    for _ in range(L):
        l_, g_ = gn.backward(xb, ab, None, rng.standard_normal((len(xb), params.K)), params)
        loss += l_ / L
        grads = {k: v / L for k, v in g_.items()} if grads is None else \
            {k: grads[k] + v / L for k, v in g_.items()}
    return loss, grads
