"""Marginal coverage across projection families and depth notions.

Every combination should land near the nominal 90%.  One small replicate
per cell, and all cells share the same test points, so expect a few points of
correlated noise.  Takes about twenty seconds.
"""

# %%
from lsci import DepthKind, LSCIConfig, ProjectionKind, evaluate_lsci, fit_ridge, generate
from lsci.basemodel import residuals

ds = generate("Reg1D", seed=5, n_train=500, n_cal=500, n_test=500)
model = fit_ridge(ds.train.f, ds.train.g)
res_cal = residuals(model, ds.cal.f, ds.cal.g)
res_test = residuals(model, ds.test.f, ds.test.g)

# %%
print(f"{'family':8s}" + "".join(f"{d.value:>13s}" for d in DepthKind))
for proj in ProjectionKind:
    row = []
    for depth in DepthKind:
        cfg = LSCIConfig(projection=proj, depth=depth, n_phi=20, seed=5)
        out = evaluate_lsci(ds.cal.f, res_cal, ds.test.f, res_test, cfg)
        row.append(out["in_set"].mean())
    print(f"{proj.value:8s}" + "".join(f"{c:13.3f}" for c in row))
