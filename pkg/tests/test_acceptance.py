"""Acceptance gate: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion.  The desk-scale replication (criteria 5 and 6) runs two full
10000-sweep estimations and dominates the runtime.
"""

import itertools
import time

import numpy as np
import pytest

import msgarch as mg
from msgarch._kernels import garch_taylor_kernel
from msgarch.diagnostics import inefficiency_factor
from msgarch.ffbs import antithetic_uniform_block
from msgarch.run import gibbs_run, parse_config
from msgarch.stochastics import RandomStream

from conftest import exact_path_posterior, path_id, random_two_regime

INIT = mg.VarianceInit(1.0)


def _report(criterion: str, passed: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line, flush=True)
    assert passed, line


# ---------------------------------------------------------------- criterion 1

def test_criterion_1_enumeration_invariance():
    t0 = time.perf_counter()
    n_sweeps = 50000
    kinds = [mg.AuxKind.B, mg.AuxKind.D, mg.AuxKind.K]
    worst = 0.0
    for rep in range(3):
        r = np.random.default_rng(9100 + rep)
        theta = random_two_regime(r, beta_floor=0.1)
        y, _ = mg.simulate_dgp(theta, 3, seed=9200 + rep)
        _, post = exact_path_posterior(y, theta, INIT)
        fo = mg.forward_filter(y, theta, kinds[rep], INIT)
        for sampler in ("single-move", "mtm", "mtmis", "mctm"):
            s = RandomStream(9300 + rep, 0)
            path, _ = mg.backward_sample(fo, theta.trans, s.generator.random(3))
            chain = mg.ChainState(y=y, params=theta, path=path, init=INIT)
            ids = np.empty(n_sweeps, dtype=np.int8)
            for i in range(n_sweeps):
                if sampler == "mtm":
                    mg.mtm_update(chain, fo, 2, s)
                elif sampler == "mtmis":
                    mg.mtmis_update(chain, fo, 2, s)
                elif sampler == "mctm":
                    mg.mctm_update(chain, fo, 2, s)
                else:
                    mg.single_move_sweep(chain, y, s)
                ids[i] = path_id(chain.path.regimes)
            for j in range(8):
                ind = (ids == j).astype(float)
                iff = max(1.0, inefficiency_factor(ind, 200))
                se = np.sqrt(post[j] * (1 - post[j]) * iff / n_sweeps)
                worst = max(worst, abs(ind.mean() - post[j]) / se)
    elapsed = time.perf_counter() - t0
    _report("1 enumeration-invariance",
            worst < 4.0 and elapsed < 120.0,
            f"max|z|={worst:.2f}, runtime={elapsed:.0f}s")


# ---------------------------------------------------------------- criterion 2

def test_criterion_2_exactness_regime_oracle():
    t0 = time.perf_counter()
    trans = np.array([[0.95, 0.1], [0.05, 0.9]])
    theta = mg.make_params([0.05, 0.05], [0.3, 1.5], [0.3, 0.1], [0.0, 0.0], trans)
    y, _ = mg.simulate_dgp(theta, 200, seed=9400)
    y10 = mg.ObservationSeries(y.y[:10])
    exact10 = mg.exact_likelihood_enumerate(y10, theta, INIT)
    filt_ok = True
    for kind in mg.AuxKind:
        fo10 = mg.forward_filter(y10, theta, kind, INIT)
        if abs(fo10.log_marginal - exact10) > 1e-8 * abs(exact10):
            filt_ok = False
    fo = mg.forward_filter(y, theta, mg.AuxKind.K, INIT)
    s = RandomStream(9401, 0)
    path, _ = mg.backward_sample(fo, theta.trans, s.generator.random(200))
    chain = mg.ChainState(y=y, params=theta, path=path, init=INIT)
    n_acc = 0
    max_spread = 0.0
    for _ in range(50):
        w_cur = mg.importance_log_weight(chain.path, theta, y, fo, INIT)
        _, rep = mg.mtmis_update(chain, fo, 2, s)
        n_acc += rep.accepted
        w_new = mg.importance_log_weight(chain.path, theta, y, fo, INIT)
        max_spread = max(max_spread, abs(w_new - w_cur) / abs(w_cur))
    elapsed = time.perf_counter() - t0
    _report("2 exactness-regime oracle",
            filt_ok and n_acc == 50 and max_spread < 1e-8 and elapsed < 10.0,
            f"acc={n_acc}/50, weight spread={max_spread:.2e}, runtime={elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 3

def test_criterion_3_ffbs_distribution():
    r = np.random.default_rng(9500)
    theta = random_two_regime(r, beta_floor=0.1)
    y, _ = mg.simulate_dgp(theta, 4, seed=9501)
    fo = mg.forward_filter(y, theta, mg.AuxKind.SK, INIT)
    probs = np.zeros(16)
    for reg in itertools.product((0, 1), repeat=4):
        p = mg.StatePath(np.array(reg), 2)
        probs[path_id(p.regimes)] = np.exp(mg.proposal_logdensity(p, fo, theta.trans))
    n = 200000
    s = RandomStream(9502, 0)
    u = s.generator.random((n, 4))
    counts = np.zeros(16)
    for i in range(n):
        path, _ = mg.backward_sample(fo, theta.trans, u[i])
        counts[path_id(path.regimes)] += 1
    se = np.sqrt(probs * (1 - probs) / n)
    zmax = np.max(np.abs(counts / n - probs) / np.maximum(se, 1e-12))
    # normalization at T = 3
    y3, _ = mg.simulate_dgp(theta, 3, seed=9503)
    fo3 = mg.forward_filter(y3, theta, mg.AuxKind.G, INIT)
    total = sum(np.exp(mg.proposal_logdensity(mg.StatePath(np.array(reg), 2), fo3,
                                              theta.trans))
                for reg in itertools.product((0, 1), repeat=3))
    _report("3 ffbs-distribution",
            zmax < 4.0 and abs(total - 1.0) < 1e-10,
            f"max|z|={zmax:.2f}, |sum q - 1|={abs(total - 1.0):.2e}")


# ---------------------------------------------------------------- criterion 4

def test_criterion_4_antithetic_suite():
    n = 100000
    ks_ok = True
    cov_ok = True
    for K in (2, 3):
        s = RandomStream(9600 + K, 0)
        block = antithetic_uniform_block(K, n, s)
        for k in range(K):
            u = np.sort(block.u[:, k] % 1.0)
            ks = np.max(np.abs(u - (np.arange(1, n + 1) - 0.5) / n)) + 0.5 / n
            ks_ok = ks_ok and ks < 0.01
        for i in range(K):
            for j in range(i + 1, K):
                cov = np.cov(block.u[:, i], block.u[:, j])[0, 1]
                cov_ok = cov_ok and cov <= 1e-3
    # extreme antithetic coupling at filtered probability one half
    theta = mg.make_params([0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [0.0, 0.0],
                           np.full((2, 2), 0.5))
    y1 = mg.ObservationSeries(np.array([0.0]))
    fo = mg.forward_filter(y1, theta, mg.AuxKind.B, INIT)
    s = RandomStream(9610, 0)
    x1 = np.empty(n)
    x2 = np.empty(n)
    for i in range(n):
        (p1, _), (p2, _) = mg.backward_antithetic_sample(fo, theta.trans, 2, s)
        x1[i] = 1.0 - p1.regimes[0]
        x2[i] = 1.0 - p2.regimes[0]
    cov12 = float(np.mean(x1 * x2) - x1.mean() * x2.mean())
    d2 = float(np.mean(2.0 * (x1 != x2)))
    _report("4 antithetic-suite",
            ks_ok and cov_ok and abs(cov12 + 0.25) < 0.01 and abs(d2 - 2.0) < 0.02,
            f"cov={cov12:.4f}, E[d2]={d2:.4f}")


# ------------------------------------------------------- criteria 5 and 6

DGP = mg.make_params([0.06, -0.09], [0.30, 2.00], [0.35, 0.10], [0.20, 0.60],
                     np.array([[0.98, 0.04], [0.02, 0.96]]))
DGP_VALUES = np.array([0.98, 0.96, 0.06, -0.09, 0.30, 2.00, 0.35, 0.10, 0.20, 0.60])
DATA_SEED = 424242
CHAIN_SEED = 1


@pytest.fixture(scope="module")
def study_runs():
    y, truth = mg.simulate_dgp(DGP, 1500, seed=DATA_SEED)
    base = {"mode": "fit", "model": {"M": 2},
            "sweeps": 10000, "burn_in": 2000, "seed": CHAIN_SEED, "chains": 1}
    cfg_mm = parse_config({**base, "sampler": {"kind": "mtm", "K": 2,
                                               "aux": "klaassen"}})
    t0 = time.perf_counter()
    res_mm = gibbs_run(cfg_mm, y)
    t_mm = time.perf_counter() - t0
    cfg_sm = parse_config({**base, "sampler": {"kind": "single-move"}})
    t0 = time.perf_counter()
    res_sm = gibbs_run(cfg_sm, y)
    t_sm = time.perf_counter() - t0
    return y, truth, res_mm, t_mm, res_sm, t_sm


def test_criterion_5_simulation_study_replication(study_runs):
    _, truth, res, t_mm, _, _ = study_runs
    pooled = res.pooled()
    means = pooled.mean(axis=0)
    sds = pooled.std(axis=0, ddof=1)
    within = int(np.sum(np.abs(means[:10] - DGP_VALUES) <= 2.0 * sds[:10]))
    cls = mg.classify_regimes(res.state_mean[:, 1], truth)
    acc = res.traces[0].accept_counts
    rate = acc["state_accept"] / acc["sweeps"]
    _report("5 simulation-study replication",
            within >= 8 and cls >= 0.90 and 0.01 <= rate <= 0.30 and t_mm < 1800,
            f"within-2sd={within}/10, classification={cls:.3f}, "
            f"state-acc={rate:.3f}, runtime={t_mm / 60:.1f}min")


def test_criterion_6_efficiency_ordering(study_runs):
    _, _, res_mm, t_mm, res_sm, t_sm = study_runs
    mse_mm = mg.mse(res_mm.pooled().mean(axis=0)[:10], DGP_VALUES)
    mse_sm = mg.mse(res_sm.pooled().mean(axis=0)[:10], DGP_VALUES)
    n_ri = 0
    for j in range(11):
        if_mm = inefficiency_factor(res_mm.traces[0].draws[:, j], 500)
        if_sm = inefficiency_factor(res_sm.traces[0].draws[:, j], 500)
        ri = mg.relative_inefficiency(if_sm, t_sm, if_mm, t_mm)
        n_ri += ri > 1.0
    _report("6 efficiency-ordering",
            mse_mm < mse_sm and n_ri >= 9,
            f"mse mm={mse_mm:.4f} < sm={mse_sm:.4f}: {mse_mm < mse_sm}; "
            f"RI>1 for {n_ri}/11")


# ---------------------------------------------------------------- criterion 7

def test_criterion_7_numerical_oracles():
    # gradient recursions against central finite differences, 100 configs
    worst = 0.0
    for rep in range(100):
        r = np.random.default_rng(9700 + rep)
        theta = random_two_regime(r, beta_floor=0.05)
        T = 40
        y, path = mg.simulate_dgp(theta, T, seed=9800 + rep)
        reg = path.regimes
        k = rep % 2
        wstar = np.empty(T)
        grads = np.empty((T, 3))
        garch_taylor_kernel(y.y, reg, theta.mu_vec, theta.gamma_vec,
                            theta.alpha_vec, theta.beta_vec, k, 1.0, wstar, grads)
        h = 1e-6
        for ci in range(3):
            arrs = [theta.gamma_vec.copy(), theta.alpha_vec.copy(),
                    theta.beta_vec.copy()]
            wp, wm = np.empty(T), np.empty(T)
            scratch = np.empty((T, 3))
            arrs[ci][k] += h
            garch_taylor_kernel(y.y, reg, theta.mu_vec, arrs[0], arrs[1], arrs[2],
                                k, 1.0, wp, scratch)
            arrs[ci][k] -= 2 * h
            garch_taylor_kernel(y.y, reg, theta.mu_vec, arrs[0], arrs[1], arrs[2],
                                k, 1.0, wm, scratch)
            fd = (wp - wm) / (2 * h)
            rel = np.abs(fd - grads[:, ci]) / np.maximum(np.abs(grads[:, ci]), 1.0)
            worst = max(worst, float(rel.max()))
    grad_ok = worst < 1e-5

    # truncated-MVN Gibbs against the univariate inverse-CDF law
    from scipy.stats import truncnorm
    s = RandomStream(9900, 0)
    m, v, lo, hi = 0.2, 0.5, -0.3, 0.9
    n = 100000
    draws = np.array([mg.truncated_mvn_gibbs(np.array([m]), np.array([[v]]),
                                             np.array([lo]), np.array([hi]), 10, s)[0]
                      for _ in range(n)])
    sd = np.sqrt(v)
    ref = truncnorm((lo - m) / sd, (hi - m) / sd, loc=m, scale=sd)
    grid = np.sort(draws)
    ks = float(np.max(np.abs(ref.cdf(grid) - np.arange(1, n + 1) / n)))
    ks_ok = ks < 0.01

    # Dirichlet posterior means against the closed form
    prior = parse_config({"mode": "fit", "model": {"M": 2}, "sweeps": 10,
                          "burn_in": 1}).prior
    counts = mg.TransitionCounts(np.array([[98, 5], [2, 15]], dtype=np.int64))
    s = RandomStream(9901, 0)
    n = 100000
    acc = np.zeros((2, 2))
    for _ in range(n):
        acc += mg.sample_transition(counts, prior, s).p
    post_mean = acc / n
    expect = (counts.n + 1.0) / (counts.n + 1.0).sum(axis=0, keepdims=True)
    a = counts.n + 1.0
    tot = a.sum(axis=0, keepdims=True)
    se = np.sqrt(expect * (1 - expect) / (tot + 1) / n)
    dir_ok = bool(np.all(np.abs(post_mean - expect) < 3 * se))

    # inefficiency factor of an iid chain
    x = np.random.default_rng(93).standard_normal(10000)
    iff = inefficiency_factor(x, 500)
    if_ok = 0.8 < iff < 1.2

    _report("7 numerical-oracles",
            grad_ok and ks_ok and dir_ok and if_ok,
            f"grad rel err={worst:.2e}, KS={ks:.4f}, IF={iff:.3f}")


# ---------------------------------------------------------------- criterion 8

def test_criterion_8_determinism(tmp_path):
    import filecmp

    from msgarch.run import emit_results
    y, _ = mg.simulate_dgp(DGP, 250, seed=9950)
    cfg = parse_config({"mode": "fit", "model": {"M": 2},
                        "sampler": {"kind": "mtm", "K": 2, "aux": "klaassen"},
                        "sweeps": 400, "burn_in": 100, "seed": 77, "chains": 2})
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    emit_results(gibbs_run(cfg, y), str(d1))
    emit_results(gibbs_run(cfg, y), str(d2))
    same = all(filecmp.cmp(d1 / f"trace_{i}.csv", d2 / f"trace_{i}.csv", shallow=False)
               for i in range(2))
    _report("8 determinism", same, "byte-identical traces across reruns")
