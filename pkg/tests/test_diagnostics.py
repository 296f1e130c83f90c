import csv

import numpy as np

from donut import gaussian_net as gn
from donut.detector import DetectConfig
from donut.diagnostics import (VARIANTS, abnormal_window_fraction, add_missing_bursts,
                               export_latent, make_dataset, run_ablation, summarize_ablation,
                               time_gradient_ratio, write_ablation_csv, write_latent_csv)
from donut.synthetic import SynthConfig, generate
from donut.training import TrainConfig

from test_gaussian_net import random_params

SMALL = SynthConfig(length=2000, period=50, amplitudes=(1.0,), phases=(0.0,),
                    anomaly_rate=0.02, anomaly_duration=(1, 3), shift_duration=(5, 10),
                    missing_rate=0.005, missing_burst=(1, 3), seed=5)


def test_make_dataset_hides_test_labels():
    raw = generate(SMALL).raw
    d = make_dataset(raw, label_ratio=1.0)
    assert [len(d.train), len(d.valid), len(d.test)] == [980, 420, 600]
    assert not d.test.anomaly_mask.any()
    np.testing.assert_array_equal(d.truth.anomaly_mask, raw.labels[1400:].astype(bool))
    assert d.retained_labels == raw.labels[:980].sum()
    assert make_dataset(raw).retained_labels == 0


def test_export_latent():
    data = make_dataset(generate(SMALL).raw)
    p = random_params(np.random.default_rng(0), W=20, K=2)
    last, tod, mu, sigma = export_latent(data.test, p, chunk=100)
    assert len(last) == len(data.test) - 19 == len(mu)
    assert last[0] == 19
    assert np.all(sigma >= p.epsilon)
    assert np.all((0 <= tod) & (tod < 86400))
    np.testing.assert_allclose(mu[5], gn.encode(data.test.values[5:25], p).mu, rtol=1e-12)


def test_latent_csv(tmp_path):
    latent = (np.array([3, 4]), np.array([0, 60]), np.ones((2, 2)), np.full((2, 2), 0.5))
    path = tmp_path / "z.csv"
    write_latent_csv(path, latent)
    rows = list(csv.reader(path.open()))
    assert rows[1] == ["3", "0", "1.0", "1.0", "0.5", "0.5"]


def test_time_gradient_ratio():
    t = np.linspace(0, 2 * np.pi, 2000)
    smooth = np.c_[np.cos(t), np.sin(t)]
    adj, rand = time_gradient_ratio(smooth)
    assert adj < 0.01 * rand
    shuffled = np.random.default_rng(0).permutation(smooth)
    adj, rand = time_gradient_ratio(shuffled)
    assert adj > 0.8 * rand


def test_add_missing_bursts():
    data = make_dataset(generate(SMALL).raw)
    before = abnormal_window_fraction(data.train, 20)
    out = add_missing_bursts(data.train, 20, 0.5, np.random.default_rng(1))
    assert abnormal_window_fraction(out, 20) >= 0.5 > before
    assert np.all(out.missing_mask >= data.train.missing_mask)
    assert np.all(out.values[out.missing_mask == 1] == 0)
    same = add_missing_bursts(data.train, 20, 0.0, np.random.default_rng(1))
    np.testing.assert_array_equal(same.missing_mask, data.train.missing_mask)


def test_ablation_rows(tmp_path):
    data = make_dataset(generate(SMALL).raw)
    base = TrainConfig(W=20, K=2, hidden=8, epochs=1, batch_size=128)
    cache = {}
    rows = run_ablation(data, base, DetectConfig(mc_samples=4, mcmc_iters=2), cache=cache)
    assert [r.variant for r in rows] == [v.name for v in VARIANTS]
    assert len(cache) == 3  # baseline, m_elbo, m_elbo+injection models
    last = rows[-1]
    assert last.variant == "all_three" and last.injection_lambda > 0 and last.use_mcmc
    assert rows[0].mode == "vae_baseline" and not rows[0].use_mcmc
    assert rows[1].injection_lambda == 0
    assert all(0 <= r.best_f_score <= 1 and 0 <= r.auc <= 1 for r in rows)
    assert list(summarize_ablation(rows)) == [v.name for v in VARIANTS]
    path = tmp_path / "ablation.csv"
    write_ablation_csv(path, rows)
    assert len(path.read_text().splitlines()) == 6
