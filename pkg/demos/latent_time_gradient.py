"""Look inside the latent space of a K=2 model.

Windows that are next to each other in time should land next to each
other in z.  This writes latent.csv (posterior mean and std per window,
tagged with time of day) for plotting elsewhere and prints the distance
statistic behind that claim.

    python demos/latent_time_gradient.py [epochs]
"""
import sys

import numpy as np

from donut.diagnostics import export_latent, make_dataset, time_gradient_ratio, write_latent_csv
from donut.synthetic import SynthConfig, generate
from donut.training import TrainConfig, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 50
data = make_dataset(generate(SynthConfig(seed=0)).raw)
params, _ = train(data.train, data.valid, TrainConfig(epochs=epochs, K=2))

latent = export_latent(data.test, params)
write_latent_csv("latent.csv", latent)
last, tod, mu, sigma = latent

adjacent, rand = time_gradient_ratio(mu)
print(f"mean |mu(t+1) - mu(t)|      {adjacent:.4f}")
print(f"mean |mu(i) - mu(j)| random {rand:.4f}")
print(f"ratio                       {adjacent / rand:.3f}")
print("smallest posterior std", sigma.min())

# mean posterior position per hour of day: a smooth loop when the model is healthy
hour = tod // 3600
for h in range(0, 24, 3):
    print(f"  {h:02d}:00  mu = {np.round(mu[hour == h].mean(axis=0), 3)}")
