"""Train Donut on a month of synthetic one-minute KPI data and score the last 30%.

    python demos/detect_synthetic_kpi.py [epochs] [seed]

With the default 50 epochs this takes about a minute on one core.
"""
import sys

import numpy as np

from donut.detector import DetectConfig, detect
from donut.diagnostics import make_dataset
from donut.metrics import evaluate
from donut.series import smoothness_stat
from donut.synthetic import SynthConfig, generate
from donut.training import TrainConfig, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 50
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

# 30 days at one point per minute, daily period, 1% anomalies and 0.3% missing
fixture = generate(SynthConfig(seed=seed))
raw = fixture.raw
print("points", len(raw.timestamps), "labeled anomalies", int(raw.labels.sum()),
      "missing", int(np.isnan(raw.values).sum()))
kinds = [k for _, _, k in fixture.anomaly_kinds]
print("anomaly segments by kind", {k: kinds.count(k) for k in sorted(set(kinds))})

# chronological 49/21/30 split; labels ignored for training (fully unsupervised)
data = make_dataset(raw, label_ratio=0.0, seed=seed)
print("train/valid/test", len(data.train), len(data.valid), len(data.test))
print("smoothness of the training split", round(smoothness_stat(data.train), 4))

cfg = TrainConfig(epochs=epochs, K=3, seed=seed)
params, trace = train(data.train, data.valid, cfg)
print("best validation epoch", trace.best_epoch, "of", epochs)
for row in trace.rows[::10]:
    print(f"  epoch {row.epoch:3d}  lr {row.lr:.2e}  valid M-ELBO {row.valid_m_elbo:9.3f}")

scores = detect(data.test, params, DetectConfig(seed=seed))
report = evaluate(data.truth, scores)
print(report.summary())

# the worst points in the test split next to their labels
order = np.argsort(np.nan_to_num(scores, nan=-np.inf))[::-1][:10]
for i in order:
    print(f"  t={i:5d} score {scores[i]:10.2f} labeled={bool(data.truth.anomaly_mask[i])}")
