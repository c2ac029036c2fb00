"""Band widths that follow the noise level, compared with a constant band.

The noise scale of the Reg1D targets varies with a hidden index ``t``.  A
constant-width baseline cannot track it; the LSCI bands should, which shows
up as a distance correlation near one between width and the true scale.
Takes a few seconds.
"""

# %%
import numpy as np

from lsci import LSCIConfig, Localizer, evaluate_lsci, fit_ridge, generate
from lsci.basemodel import residuals
from lsci.eval.baselines import baseline_supr
from lsci.eval.metrics import distance_correlation

ds = generate("Reg1D", seed=3, n_train=1000, n_cal=1000, n_test=150)
model = fit_ridge(ds.train.f, ds.train.g)
res_cal = residuals(model, ds.cal.f, ds.cal.g)
res_test = residuals(model, ds.test.f, ds.test.g)
sigma = ds.test.sigma

# %%
cfg = LSCIConfig(n_phi=20, localizer=Localizer("L2", 1.0), seed=3)
out = evaluate_lsci(ds.cal.f, res_cal, ds.test.f, res_test, cfg, n_samples=300, m=20)
print(f"LSCI  coverage {out['in_set'].mean():.3f}  risk {out['covered'].mean():.3f}  "
      f"dCW {distance_correlation(out['width'], sigma):.3f}")

supr = baseline_supr(res_cal, alpha=0.1)
width = np.full(len(sigma), 2 * supr.k_n)
print(f"Supr  coverage {supr.contains(res_test.values).mean():.3f}  "
      f"dCW {distance_correlation(width, sigma):.3f}")

# %%
# Width against the true noise level, binned.
order = np.argsort(sigma)
for chunk in np.array_split(order, 5):
    print(f"sigma {sigma[chunk].mean():.3f}: mean LSCI width {out['width'][chunk].mean():.3f}")
