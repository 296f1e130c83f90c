import math

import numpy as np
import pytest

from donut import gaussian_net as gn
from donut.series import PreparedSeries, Window, window_matrix
from donut.training import (AdamState, TrainConfig, add_l2, adam_step, clip_gradients,
                            elbo_decomposition, global_norm, l2_penalty, lr_schedule,
                            m_elbo_estimate, train)

from test_gaussian_net import random_params, toy_params

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def series(values, missing=None, anomaly=None):
    values = np.asarray(values, dtype=float)
    n = len(values)
    z = np.zeros(n, np.int8)
    return PreparedSeries(values, z.copy() if missing is None else np.asarray(missing, np.int8),
                          z.copy() if anomaly is None else np.asarray(anomaly, np.int8),
                          0.0, 1.0, 60, np.arange(n) * 60)


def plain_elbo(x, xi, params):
    """Standard single-draw ELBO built directly from the network pieces."""
    q = gn.encode(x, params)
    z = gn.reparameterize(q, xi)
    prior = gn.DiagGaussian(np.zeros(params.K), np.ones(params.K))
    return (gn.gaussian_log_prob(x, gn.decode(z, params)) + gn.gaussian_log_prob(z, prior)
            - gn.gaussian_log_prob(z, q))


def test_m_elbo_reduces_to_elbo_when_fully_observed():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = random_params(rng, W=6, K=3)
        x = rng.normal(size=6)
        xi = rng.normal(size=(1, 3))
        w = Window(x, np.ones(6), 1.0, 5)
        assert abs(m_elbo_estimate(w, p, xi) - plain_elbo(x, xi[0], p)) < 1e-12


def test_all_missing_leaves_only_entropy():
    rng = np.random.default_rng(1)
    p = random_params(rng, W=5, K=2)
    x = rng.normal(size=5)
    xi = rng.normal(size=(4, 2))
    w = Window(x, np.zeros(5), 0.0, 4)
    q = gn.encode(x, p)
    expected = -np.mean([gn.gaussian_log_prob(gn.reparameterize(q, e), q) for e in xi])
    t = elbo_decomposition(w, p, xi)
    assert t.recon == 0.0 and t.prior == 0.0
    assert m_elbo_estimate(w, p, xi) == pytest.approx(expected, abs=1e-12)


def test_hand_toy_m_elbo():
    # x=[1,2] alpha=[1,0] beta=0.5 xi=0: z = 0.55, decoder h2 = 0.2,
    # mu_x = [0.3, -0.5], sigma_x pre-activation = [0, 0.5]
    p = toy_params()
    s0 = math.log(2.0) + 1e-4
    recon = -HALF_LOG_2PI - math.log(s0) - 0.5 * ((1.0 - 0.3) / s0) ** 2
    prior = 0.5 * (-HALF_LOG_2PI - 0.5 * 0.55 ** 2)
    entropy = HALF_LOG_2PI + math.log(s0)
    w = Window(np.array([1.0, 2.0]), np.array([1.0, 0.0]), 0.5, 1)
    t = elbo_decomposition(w, p, np.zeros((1, 1)))
    assert t.recon == pytest.approx(recon, abs=1e-12)
    assert t.prior == pytest.approx(prior, abs=1e-12)
    assert t.entropy == pytest.approx(entropy, abs=1e-12)
    assert m_elbo_estimate(w, p, np.zeros((1, 1))) == pytest.approx(recon + prior + entropy, abs=1e-12)


def test_decomposition_sums_and_prior_bound():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = random_params(rng, W=5, K=3)
        alpha = (rng.random(5) < 0.6).astype(float)
        w = Window(rng.normal(size=5), alpha, alpha.mean(), 4)
        xi = rng.normal(size=(8, 3))
        t = elbo_decomposition(w, p, xi)
        assert abs(t.total - m_elbo_estimate(w, p, xi)) < 1e-10
        assert t.prior <= w.beta * -3 * HALF_LOG_2PI + 1e-12


def test_entropy_matches_closed_form():
    p = gn.ModelParams(W=4, K=1)
    sigma = math.log(2.0) + 1e-4
    L = 100000
    t = elbo_decomposition(Window(np.zeros(4), np.ones(4), 1.0, 3), p, L)
    exact = 0.5 * math.log(2 * math.pi * math.e * sigma ** 2)
    assert abs(t.entropy - exact) < 4 * math.sqrt(0.5 / L)


def test_lr_schedule():
    cfg = TrainConfig()
    assert lr_schedule(0, cfg) == 1e-3
    assert lr_schedule(9, cfg) == 1e-3
    assert lr_schedule(10, cfg) == pytest.approx(7.5e-4, rel=1e-15)
    assert lr_schedule(25, cfg) == pytest.approx(5.625e-4, rel=1e-15)


def test_clip_gradients():
    g = {"a": np.array([12.0, 16.0])}  # norm 20
    np.testing.assert_allclose(clip_gradients(g, 10.0)["a"], [6.0, 8.0])
    small = {"a": np.array([3.0, 4.0])}
    assert clip_gradients(small, 10.0)["a"] is small["a"]
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = {k: rng.normal(0, rng.uniform(0.1, 20), size=(3, 4)) for k in "abc"}
        out = clip_gradients(g, 10.0)
        assert global_norm(out) <= 10.0 + 1e-9
        assert global_norm(out) <= global_norm(g) + 1e-12
    with pytest.raises(ValueError):
        clip_gradients(g, 0.0)


def test_adam_zero_gradient_is_noop():
    p = random_params(np.random.default_rng(4))
    zeros = {k: np.zeros_like(v) for k, v in p.tensors.items()}
    q, state = adam_step(p, zeros, AdamState.fresh(p), 1e-3)
    for k in p.tensors:
        np.testing.assert_array_equal(q[k], p[k])
    assert state.step == 1


def test_adam_first_step_is_lr():
    p = gn.ModelParams(W=2, K=1, hidden=1)
    ones = {k: np.ones_like(v) for k, v in p.tensors.items()}
    q, _ = adam_step(p, ones, AdamState.fresh(p), 1e-3)
    # m_hat = 1, v_hat = 1: step = lr / (1 + 1e-8)
    for k in p.tensors:
        np.testing.assert_allclose(p[k] - q[k], 1e-3 / (1 + 1e-8), rtol=1e-12)


def test_l2_only_touches_hidden_weights():
    p = random_params(np.random.default_rng(5))
    zeros = {k: np.zeros_like(v) for k, v in p.tensors.items()}
    g = add_l2(zeros, p, 0.1)
    for k in p.tensors:
        if k in gn.HIDDEN_WEIGHTS:
            np.testing.assert_allclose(g[k], 0.1 * p[k])
        else:
            assert not g[k].any()
    # penalty gradient by finite differences on one hidden weight
    name = "dec_h1_w"
    h = 1e-6
    base = l2_penalty(p, 0.1)
    p.tensors[name][0, 0] += h
    assert (l2_penalty(p, 0.1) - base) / h == pytest.approx(g[name][0, 0], rel=1e-4)


def small_cfg(**kw):
    return TrainConfig(**{"W": 20, "K": 2, "hidden": 16, "batch_size": 64, "epochs": 3, **kw})


def sine(n=1200, period=100):
    return series(np.sin(2 * np.pi * np.arange(n) / period))


def test_training_is_deterministic():
    a, ta = train(sine(), sine(400), small_cfg())
    b, tb = train(sine(), sine(400), small_cfg())
    for k in a.tensors:
        np.testing.assert_array_equal(a[k], b[k])
    assert [r.valid_m_elbo for r in ta.rows] == [r.valid_m_elbo for r in tb.rows]


def test_training_makes_progress():
    _, trace = train(sine(2000), sine(600), small_cfg(epochs=11, early_stop=False))
    assert trace.rows[10].valid_m_elbo > trace.rows[0].valid_m_elbo


def test_zero_epochs_returns_initialization():
    init = gn.init_params(20, 2, np.random.default_rng(9), hidden=16)
    params, trace = train(sine(), sine(400), small_cfg(epochs=0), params=init.copy())
    assert trace.rows == []
    for k in init.tensors:
        np.testing.assert_array_equal(params[k], init[k])


def test_baseline_drops_abnormal_windows():
    n = 10119
    missing = np.zeros(n, np.int8)
    missing[2000:2571] = 1  # touches 690 of 10000 windows
    s = series(np.sin(np.arange(n) / 10.0), missing)
    _, alpha = window_matrix(s, 120)
    assert np.mean(alpha.min(axis=1) < 1) == pytest.approx(0.069)
    _, trace = train(s, None, TrainConfig(epochs=0, mode="vae_baseline"))
    assert trace.n_train_windows == 9310
    _, trace = train(s, None, TrainConfig(epochs=0))
    assert trace.n_train_windows == 10000


def test_baseline_without_clean_windows_fails():
    s = series(np.zeros(30), missing=np.r_[np.zeros(10), 1, np.zeros(9), 1, np.zeros(9)])
    with pytest.raises(ValueError, match="no usable training windows"):
        train(s, None, small_cfg(mode="vae_baseline"))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(mode="other")
    with pytest.raises(ValueError):
        TrainConfig(injection_lambda=1.0)


def test_trace_csv(tmp_path):
    _, trace = train(sine(), sine(400), small_cfg(epochs=2))
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "epoch,lr,train_m_elbo,valid_m_elbo,recon,prior,entropy"
    assert len(lines) == 3
    row = [float(v) for v in lines[1].split(",")]
    assert row[3] == pytest.approx(row[4] + row[5] + row[6], abs=1e-9)
