import time

import numpy as np

import msgarch as mg
from msgarch.run import gibbs_run, parse_config

DGP = mg.make_params([0.06, -0.09], [0.30, 2.00], [0.35, 0.10], [0.20, 0.60],
                     np.array([[0.98, 0.04], [0.02, 0.96]]))
TRUE = [0.98, 0.96, 0.06, -0.09, 0.30, 2.00, 0.35, 0.10, 0.20, 0.60]

y, truth = mg.simulate_dgp(DGP, 1500, seed=424242)
print("data stats:", mg.summary_stats(y.y))

doc = {"mode": "fit", "model": {"M": 2},
       "sampler": {"kind": "mtm", "K": 2, "aux": "klaassen"},
       "sweeps": 10000, "burn_in": 2000, "seed": 1, "chains": 1}
cfg = parse_config(doc)

t0 = time.perf_counter()
res = gibbs_run(cfg, y)
el_mtm = time.perf_counter() - t0
print(f"MTM run: {el_mtm/60:.1f} min")

pooled = res.pooled()
means = pooled.mean(axis=0)
sds = pooled.std(axis=0, ddof=1)
within = 0
for j in range(10):
    z = abs(means[j] - TRUE[j]) / sds[j]
    ok = z <= 2.0
    within += ok
    print(f"{res.columns[j]:10s} mean={means[j]:8.4f} sd={sds[j]:7.4f} true={TRUE[j]:7.3f} z={z:5.2f} {'OK' if ok else 'MISS'}")
acc = res.traces[0].accept_counts
rate = acc["state_accept"] / acc["sweeps"]
cls = mg.classify_regimes(res.state_mean[:, 1], truth)
print(f"within-2sd: {within}/10  classification: {cls:.3f}  state acc: {rate:.3f}")

mse_mtm = mg.mse(means[:10], np.array(TRUE))
print("MTM MSE:", mse_mtm)

t0 = time.perf_counter()
cfg_sm = parse_config({**doc, "sampler": {"kind": "single-move"}})
res_sm = gibbs_run(cfg_sm, y)
el_sm = time.perf_counter() - t0
print(f"single-move run: {el_sm/60:.1f} min")
means_sm = res_sm.pooled().mean(axis=0)
mse_sm = mg.mse(means_sm[:10], np.array(TRUE))
cls_sm = mg.classify_regimes(res_sm.state_mean[:, 1], truth)
print("single-move MSE:", mse_sm, " classification:", round(cls_sm, 3))

n_ri = 0
for j, name in enumerate(res.columns):
    if_mm = mg.inefficiency_factor(res.traces[0].draws[:, j], 500)
    if_sm = mg.inefficiency_factor(res_sm.traces[0].draws[:, j], 500)
    ri = mg.relative_inefficiency(if_sm, el_sm, if_mm, el_mtm)
    n_ri += ri > 1.0
    print(f"{name:10s} IF_sm={if_sm:8.1f} IF_mm={if_mm:8.1f} RI={ri:9.2f}")
print(f"RI>1 count: {n_ri}/11;  MSE ordering mm<sm: {mse_mtm < mse_sm}")
