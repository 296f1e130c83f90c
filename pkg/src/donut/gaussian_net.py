"""Fully-connected diagonal-Gaussian VAE with hand-written backpropagation.

All functions accept a batch of inputs as rows (shape ``(B, W)`` for windows,
``(B, K)`` for latent codes); single vectors are promoted to a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))
SOFTPLUS_GUARD = 30.0

# (name, input-dim key, output-dim key); "H" is the hidden width.
LAYOUT = (
    ("enc_h1_w", "W", "H"), ("enc_h1_b", None, "H"),
    ("enc_h2_w", "H", "H"), ("enc_h2_b", None, "H"),
    ("z_mu_w", "H", "K"), ("z_mu_b", None, "K"),
    ("z_sigma_w", "H", "K"), ("z_sigma_b", None, "K"),
    ("dec_h1_w", "K", "H"), ("dec_h1_b", None, "H"),
    ("dec_h2_w", "H", "H"), ("dec_h2_b", None, "H"),
    ("x_mu_w", "H", "W"), ("x_mu_b", None, "W"),
    ("x_sigma_w", "H", "W"), ("x_sigma_b", None, "W"),
)
TENSOR_NAMES = tuple(name for name, _, _ in LAYOUT)
HIDDEN_WEIGHTS = ("enc_h1_w", "enc_h2_w", "dec_h1_w", "dec_h2_w")


@dataclass
class ModelParams:
    W: int
    K: int
    hidden: int = 100
    epsilon: float = 1e-4
    mean: float = 0.0
    std: float = 1.0
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        for name, shape in self.shapes().items():
            t = self.tensors.get(name)
            if t is None:
                self.tensors[name] = np.zeros(shape)
            elif t.shape != shape:
                raise ValueError(f"tensor {name} has shape {t.shape}, expected {shape}")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        dims = {"W": self.W, "K": self.K, "H": self.hidden}
        return {
            name: (dims[o],) if i is None else (dims[i], dims[o])
            for name, i, o in LAYOUT
        }

    def __getitem__(self, name):
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.W, self.K, self.hidden, self.epsilon, self.mean, self.std,
                           {k: v.copy() for k, v in self.tensors.items()})

    def with_tensors(self, tensors: dict[str, np.ndarray]) -> "ModelParams":
        return ModelParams(self.W, self.K, self.hidden, self.epsilon, self.mean, self.std, tensors)


@dataclass
class DiagGaussian:
    mu: np.ndarray
    sigma: np.ndarray


def init_params(W: int, K: int, rng: np.random.Generator, hidden: int = 100,
                epsilon: float = 1e-4) -> ModelParams:
    """He-normal weights (variance 2/fan_in), zero biases."""
    params = ModelParams(W, K, hidden, epsilon)
    for name, shape in params.shapes().items():
        if len(shape) == 2:
            params.tensors[name] = rng.normal(0.0, np.sqrt(2.0 / shape[0]), size=shape)
    return params


def softplus(a):
    """log(1 + exp(a)) without overflow."""
    a = np.asarray(a, dtype=np.float64)
    big = a > SOFTPLUS_GUARD
    safe = np.where(big, 0.0, a)
    out = np.where(big, a + np.log1p(np.exp(-np.abs(a))), np.log1p(np.exp(safe)))
    return out if out.ndim else float(out)


def sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def gaussian_log_prob(x, g: DiagGaussian) -> float:
    """Log density of ``x`` under a diagonal Gaussian, summed over dimensions."""
    x = np.asarray(x, dtype=np.float64)
    mu, sigma = np.asarray(g.mu, dtype=np.float64), np.asarray(g.sigma, dtype=np.float64)
    if x.shape != mu.shape or mu.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: x{x.shape}, mu{mu.shape}, sigma{sigma.shape}")
    return float(np.sum(log_normal(x, mu, sigma)))


def log_normal(x, mu, sigma):
    """Elementwise Gaussian log density."""
    r = (x - mu) / sigma
    return -0.5 * LOG_2PI - np.log(sigma) - 0.5 * r * r


def _relu(a):
    return np.maximum(a, 0.0)


def _as_batch(v, dim):
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    v = v.reshape(-1, dim)
    return v, single


def encoder_hidden(x, params: ModelParams):
    h1 = _relu(x @ params["enc_h1_w"] + params["enc_h1_b"])
    return h1, _relu(h1 @ params["enc_h2_w"] + params["enc_h2_b"])


def decoder_hidden(z, params: ModelParams):
    d1 = _relu(z @ params["dec_h1_w"] + params["dec_h1_b"])
    return d1, _relu(d1 @ params["dec_h2_w"] + params["dec_h2_b"])


def encode(x, params: ModelParams) -> DiagGaussian:
    """q(z|x): two ReLU layers, linear mean head, softplus + epsilon std head."""
    xb, single = _as_batch(x, params.W)
    _, h2 = encoder_hidden(xb, params)
    mu = h2 @ params["z_mu_w"] + params["z_mu_b"]
    sigma = softplus(h2 @ params["z_sigma_w"] + params["z_sigma_b"]) + params.epsilon
    return DiagGaussian(mu[0], sigma[0]) if single else DiagGaussian(mu, sigma)


def decode(z, params: ModelParams) -> DiagGaussian:
    """p(x|z), mirror image of :func:`encode`."""
    zb, single = _as_batch(z, params.K)
    _, d2 = decoder_hidden(zb, params)
    mu = d2 @ params["x_mu_w"] + params["x_mu_b"]
    sigma = softplus(d2 @ params["x_sigma_w"] + params["x_sigma_b"]) + params.epsilon
    return DiagGaussian(mu[0], sigma[0]) if single else DiagGaussian(mu, sigma)


def decode_last(z, params: ModelParams) -> DiagGaussian:
    """Only the last output dimension of p(x|z); used for scoring."""
    zb, _ = _as_batch(z, params.K)
    _, d2 = decoder_hidden(zb, params)
    mu = d2 @ params["x_mu_w"][:, -1] + params["x_mu_b"][-1]
    sigma = softplus(d2 @ params["x_sigma_w"][:, -1] + params["x_sigma_b"][-1]) + params.epsilon
    return DiagGaussian(mu, sigma)


def reparameterize(g: DiagGaussian, xi):
    return g.mu + xi * g.sigma


def m_elbo_terms(x, alpha, xi, params: ModelParams, beta=None):
    """Per-window single-sample (recon, prior, entropy) terms of the masked ELBO.

    ``x``, ``alpha`` have shape (B, W) and ``xi`` shape (B, K).  The prior term is
    scaled by ``beta`` (default: row mean of alpha); entropy is -log q(z|x).
    """
    x, _ = _as_batch(x, params.W)
    alpha, _ = _as_batch(alpha, params.W)
    xi, _ = _as_batch(xi, params.K)
    qz = encode(x, params)
    z = reparameterize(qz, xi)
    px = decode(z, params)
    if beta is None:
        beta = alpha.mean(axis=1)
    recon = np.sum(alpha * log_normal(x, px.mu, px.sigma), axis=1)
    prior = beta * np.sum(-0.5 * LOG_2PI - 0.5 * z * z, axis=1)
    # z - mu_z = xi * sigma_z exactly, so log q reduces to this form
    entropy = -np.sum(-0.5 * LOG_2PI - np.log(qz.sigma) - 0.5 * xi * xi, axis=1)
    return recon, prior, entropy


def backward(x, alpha, beta, xi, params: ModelParams):
    """Mean negative masked ELBO over the batch and its exact gradient.

    ``beta`` may be None, in which case it is taken as the row mean of ``alpha``.
    Returns ``(loss, grads)`` with ``grads`` keyed like ``params.tensors``.
    """
    x, _ = _as_batch(x, params.W)
    alpha, _ = _as_batch(alpha, params.W)
    xi, _ = _as_batch(xi, params.K)
    B = x.shape[0]
    beta = alpha.mean(axis=1) if beta is None else np.broadcast_to(np.asarray(beta, dtype=np.float64), (B,))
    p = params.tensors
    eps = params.epsilon

    # forward, keeping activations
    a1 = x @ p["enc_h1_w"] + p["enc_h1_b"]
    h1 = _relu(a1)
    a2 = h1 @ p["enc_h2_w"] + p["enc_h2_b"]
    h2 = _relu(a2)
    mu_z = h2 @ p["z_mu_w"] + p["z_mu_b"]
    s_pre_z = h2 @ p["z_sigma_w"] + p["z_sigma_b"]
    sigma_z = softplus(s_pre_z) + eps
    z = mu_z + xi * sigma_z
    c1 = z @ p["dec_h1_w"] + p["dec_h1_b"]
    d1 = _relu(c1)
    c2 = d1 @ p["dec_h2_w"] + p["dec_h2_b"]
    d2 = _relu(c2)
    mu_x = d2 @ p["x_mu_w"] + p["x_mu_b"]
    s_pre_x = d2 @ p["x_sigma_w"] + p["x_sigma_b"]
    sigma_x = softplus(s_pre_x) + eps

    r = (x - mu_x) / sigma_x
    recon = np.sum(alpha * (-0.5 * LOG_2PI - np.log(sigma_x) - 0.5 * r * r), axis=1)
    prior = beta * np.sum(-0.5 * LOG_2PI - 0.5 * z * z, axis=1)
    entropy = -np.sum(-0.5 * LOG_2PI - np.log(sigma_z) - 0.5 * xi * xi, axis=1)
    loss = -float(np.mean(recon + prior + entropy))

    # backward; every upstream gradient carries the 1/B of the batch mean
    inv_b = 1.0 / B
    g_mu_x = -alpha * r / sigma_x * inv_b
    g_sigma_x = alpha * (1.0 - r * r) / sigma_x * inv_b
    g_spre_x = g_sigma_x * sigmoid(s_pre_x)
    g = {
        "x_mu_w": d2.T @ g_mu_x, "x_mu_b": g_mu_x.sum(axis=0),
        "x_sigma_w": d2.T @ g_spre_x, "x_sigma_b": g_spre_x.sum(axis=0),
    }
    g_d2 = g_mu_x @ p["x_mu_w"].T + g_spre_x @ p["x_sigma_w"].T
    g_c2 = g_d2 * (c2 > 0)
    g["dec_h2_w"], g["dec_h2_b"] = d1.T @ g_c2, g_c2.sum(axis=0)
    g_c1 = (g_c2 @ p["dec_h2_w"].T) * (c1 > 0)
    g["dec_h1_w"], g["dec_h1_b"] = z.T @ g_c1, g_c1.sum(axis=0)
    g_z = g_c1 @ p["dec_h1_w"].T + (beta * inv_b)[:, None] * z

    g_mu_z = g_z
    g_sigma_z = g_z * xi - inv_b / sigma_z
    g_spre_z = g_sigma_z * sigmoid(s_pre_z)
    g["z_mu_w"], g["z_mu_b"] = h2.T @ g_mu_z, g_mu_z.sum(axis=0)
    g["z_sigma_w"], g["z_sigma_b"] = h2.T @ g_spre_z, g_spre_z.sum(axis=0)
    g_a2 = (g_mu_z @ p["z_mu_w"].T + g_spre_z @ p["z_sigma_w"].T) * (a2 > 0)
    g["enc_h2_w"], g["enc_h2_b"] = h1.T @ g_a2, g_a2.sum(axis=0)
    g_a1 = (g_a2 @ p["enc_h2_w"].T) * (a1 > 0)
    g["enc_h1_w"], g["enc_h1_b"] = x.T @ g_a1, g_a1.sum(axis=0)
    return loss, {name: g[name] for name in TENSOR_NAMES}
