"""Calibrate one LSCI prediction set and turn it into a band.

Run with ``python demos/01_quickstart.py``.  Takes under a second.
"""

# %%
import numpy as np

from lsci import LSCIConfig, Localizer, calibrate, fit_ridge, generate, sample_ensemble, to_band
from lsci.basemodel import predict, residuals

# A heteroskedastic functional regression task on 64 grid points.
ds = generate("Reg1D", seed=1, n_train=500, n_cal=500, n_test=100)
model = fit_ridge(ds.train.f, ds.train.g)
res_cal = residuals(model, ds.cal.f, ds.cal.g)

# %%
# Calibrate the set for one test input.  The local measures weight each
# calibration residual by how close its input is to this test input.
i = 7
f_new = ds.test.f[i]
pred = calibrate(res_cal, ds.cal.f, f_new, predict(model, f_new),
                 LSCIConfig(n_phi=20, localizer=Localizer("L2", 1.0), alpha=0.1, seed=0))
print(f"threshold q = {pred.q:.4f}")
print(f"effective sample size of the local weights: {pred.weights.effective_size:.1f}")

# %%
# Draw functions from the set by rejection sampling, then take the envelope.
ens = sample_ensemble(pred, res_cal, m=20, n_s=300, seed=0)
band = to_band(ens)
target = ds.test.g[i].values
inside = np.mean((target >= band.lower.values) & (target <= band.upper.values))
print(f"{ens.n_accepted} members from {ens.n_proposed} proposals")
print(f"median band width {np.median(band.upper.values - band.lower.values):.3f}, "
      f"fraction of the target inside {inside:.3f}")
print(f"true residual inside the set: {bool(pred.residual_depths(target - pred.prediction.values)[0] >= pred.q)}")
