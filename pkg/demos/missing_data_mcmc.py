"""MCMC imputation under heavy missingness.

Blank out 15% of the test points, then score the test split with and
without MCMC imputation of the missing points (blanked points themselves
are excluded from evaluation).

    python demos/missing_data_mcmc.py [epochs] [seed]
"""
import sys

import numpy as np

from donut.detector import DetectConfig, detect, mcmc_impute, reconstruction_score
from donut.diagnostics import make_dataset
from donut.metrics import GroundTruth, best_fscore
from donut.series import window_matrix
from donut.synthetic import SynthConfig, generate
from donut.training import TrainConfig, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 50
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

data = make_dataset(generate(SynthConfig(seed=seed)).raw, seed=seed)
params, _ = train(data.train, data.valid, TrainConfig(epochs=epochs, seed=seed))

test = data.test.copy()
rng = np.random.default_rng([seed, 15])
hide = rng.choice(np.flatnonzero(test.missing_mask == 0), size=round(0.15 * len(test)),
                  replace=False)
test.missing_mask[hide] = 1
test.values[hide] = 0.0
truth = GroundTruth(data.truth.anomaly_mask, test.missing_mask.astype(bool))

for mcmc in (False, True):
    scores = detect(test, params, DetectConfig(seed=seed, use_mcmc=mcmc))
    print(f"MCMC {'on ' if mcmc else 'off'}  best F {best_fscore(truth, scores)[0]:.4f}")

# one window up close: zero-filled vs imputed
x, _ = window_matrix(test, params.W)
miss = np.lib.stride_tricks.sliding_window_view(test.missing_mask.astype(bool), params.W)
t = int(np.flatnonzero(miss[:, :-1].any(axis=1) & ~miss[:, -1])[0])
imputed = mcmc_impute(x[t], miss[t], params, 10, np.random.default_rng(1))
print("window", t, "missing points", int(miss[t].sum()))
print("  zero-filled score", reconstruction_score(x[t], params, 1024, np.random.default_rng(2)))
print("  imputed score    ", reconstruction_score(imputed, params, 1024, np.random.default_rng(2)))
