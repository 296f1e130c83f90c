"""Watch the three parts of the masked ELBO move during training.

The trace holds, per epoch, the validation reconstruction term, the
prior term (scaled by the share of normal points) and the entropy of
q(z|x).  Early epochs trade entropy for reconstruction.

    python demos/elbo_terms.py [epochs]
"""
import sys

from donut.diagnostics import make_dataset
from donut.synthetic import SynthConfig, generate
from donut.training import TrainConfig, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 30
data = make_dataset(generate(SynthConfig(seed=0)).raw)
params, trace = train(data.train, data.valid, TrainConfig(epochs=epochs, early_stop=False))
trace.write_csv("trace.csv")

print("epoch     recon     prior   entropy     total")
for r in trace.rows:
    print(f"{r.epoch:5d} {r.recon:9.2f} {r.prior:9.3f} {r.entropy:9.3f} {r.valid_m_elbo:9.2f}")
