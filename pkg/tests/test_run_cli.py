import filecmp
import json

import numpy as np
import pytest

import msgarch as mg
from msgarch.cli import main
from msgarch.run import (ConfigError, emit_results, gibbs_run, parse_config,
                         run_compare)

STUDY_DGP = {
    "M": 2,
    "regimes": [
        {"mu": 0.06, "gamma": 0.30, "alpha": 0.35, "beta": 0.20},
        {"mu": -0.09, "gamma": 2.00, "alpha": 0.10, "beta": 0.60},
    ],
    "transition": [[0.98, 0.04], [0.02, 0.96]],
}


def _fit_doc(**over):
    doc = {"mode": "fit", "model": {"M": 2},
           "sampler": {"kind": "mtm", "K": 2, "aux": "klaassen"},
           "sweeps": 60, "burn_in": 20, "seed": 3, "chains": 1}
    doc.update(over)
    return doc


def test_parse_config_errors():
    with pytest.raises(ConfigError):
        parse_config({"model": {"M": 2}})
    with pytest.raises(ConfigError):
        parse_config(_fit_doc(sampler={"kind": "nuts"}))
    with pytest.raises(ConfigError):
        parse_config(_fit_doc(sweeps=10, burn_in=10))
    with pytest.raises(ConfigError):
        parse_config(_fit_doc(sampler={"kind": "mctm", "K": 5}))
    with pytest.raises(ConfigError):
        parse_config(_fit_doc(sampler={"kind": "mtm", "aux": "grey"}))
    with pytest.raises(ConfigError):
        parse_config({"mode": "compare", "model": {"M": 2}, "sweeps": 10,
                      "burn_in": 2, "samplers": [{"kind": "mtm"}]})
    with pytest.raises(ConfigError):
        parse_config(_fit_doc(model={"M": 3}))  # no default prior for M != 2


def test_parse_config_defaults():
    cfg = parse_config(_fit_doc())
    assert cfg.prior.support_gamma[1, 1] == 4.00
    assert cfg.sampler.label == "mtm-K2-klaassen"
    cfg = parse_config({"mode": "fit", "sweeps": 1000})
    assert cfg.burn_in == 200  # 20% default


def test_gibbs_run_kept_draw_count():
    theta = mg.make_params([0.06, -0.09], [0.30, 2.00], [0.35, 0.10], [0.20, 0.60],
                           np.array([[0.98, 0.04], [0.02, 0.96]]))
    y, _ = mg.simulate_dgp(theta, 120, seed=4)
    cfg = parse_config(_fit_doc(sweeps=31, burn_in=30))
    res = gibbs_run(cfg, y)
    assert res.traces[0].draws.shape == (1, 11)
    assert res.columns == ("pi_11", "pi_22", "mu_1", "mu_2", "gamma_1", "gamma_2",
                           "alpha_1", "alpha_2", "beta_1", "beta_2", "max_sigma2")


def test_gibbs_run_exactness_regime_mtmis_accepts_all():
    theta = mg.make_params([0.05, 0.05], [0.3, 1.5], [0.3, 0.1], [0.0, 0.0],
                           np.array([[0.9, 0.2], [0.1, 0.8]]))
    y, _ = mg.simulate_dgp(theta, 150, seed=5)
    # keep beta pinned at zero and the means common so every weight pair matches
    doc = _fit_doc(sampler={"kind": "mtmis", "K": 2, "aux": "basic"},
                   model={"M": 2, **{"regimes": [
                       {"mu": 0.05, "gamma": 0.3, "alpha": 0.3, "beta": 0.0},
                       {"mu": 0.05, "gamma": 1.5, "alpha": 0.1, "beta": 0.0}],
                       "transition": [[0.9, 0.2], [0.1, 0.8]]}},
                   prior={"support_mu": [[0.05, 0.0500001], [0.05, 0.0500001]],
                          "support_beta": [[0.0, 1e-9], [0.0, 1e-9]],
                          "support_gamma": [[0.05, 2.0], [0.05, 2.0]],
                          "support_alpha": [[0.0, 0.6], [0.0, 0.6]],
                          "dirichlet_nu": [[1, 1], [1, 1]]},
                   sweeps=40, burn_in=10)
    cfg = parse_config(doc)
    res = gibbs_run(cfg, y)
    acc = res.traces[0].accept_counts
    assert acc["state_accept"] == acc["sweeps"]


def test_emit_and_determinism(tmp_path):
    theta = mg.make_params([0.06, -0.09], [0.30, 2.00], [0.35, 0.10], [0.20, 0.60],
                           np.array([[0.98, 0.04], [0.02, 0.96]]))
    y, truep = mg.simulate_dgp(theta, 100, seed=6)
    cfg = parse_config(_fit_doc(sweeps=50, burn_in=10, chains=2))
    d1, d2 = tmp_path / "a", tmp_path / "b"
    emit_results(gibbs_run(cfg, y), str(d1), dgp=theta, prior=cfg.prior, truth=truep)
    emit_results(gibbs_run(cfg, y), str(d2), dgp=theta, prior=cfg.prior, truth=truep)
    for name in ("trace_0.csv", "trace_1.csv", "summary.csv", "state_means.csv"):
        assert filecmp.cmp(d1 / name, d2 / name, shallow=False), name
    diag = json.loads((d1 / "diagnostics.json").read_text())
    assert "classification" in diag
    assert set(diag["inefficiency"]) == set(diag["columns"])
    # traces round-trip numerically
    raw = np.genfromtxt(d1 / "trace_0.csv", delimiter=",", names=True)
    assert raw.shape[0] == 40


def test_run_compare_self_ri(tmp_path):
    theta = mg.make_params([0.06, -0.09], [0.30, 2.00], [0.35, 0.10], [0.20, 0.60],
                           np.array([[0.98, 0.04], [0.02, 0.96]]))
    y, truep = mg.simulate_dgp(theta, 80, seed=7)
    doc = {"mode": "compare", "model": {"M": 2, **STUDY_DGP},
           "samplers": [{"kind": "mtm", "K": 2, "aux": "basic"},
                        {"kind": "mtm", "K": 2, "aux": "basic"}],
           "sweeps": 60, "burn_in": 20, "seed": 9, "chains": 1}
    cfg = parse_config(doc)
    report = run_compare(cfg, y, truth=truep)
    # identical sampler + seed -> identical chains, so RI is pure timing noise
    lab = report["labels"][1]
    iffs = np.array(report["inefficiency"][report["labels"][0]])
    iffs2 = np.array(report["inefficiency"][lab])
    mask = np.isfinite(iffs)
    assert np.allclose(iffs[mask], iffs2[mask])
    ratio = report["wall_time"][report["labels"][0]] / report["wall_time"][lab]
    ri = np.array(report["ri"][lab])
    assert np.allclose(ri[np.isfinite(ri)], ratio, rtol=1e-9)
    assert "mse" in report and len(report["mse"]) == 2
    from msgarch.run import emit_compare
    emit_compare(report, str(tmp_path / "cmp"))
    assert (tmp_path / "cmp" / "compare_mse.csv").exists()
    assert (tmp_path / "cmp" / "compare_ri.csv").exists()


def test_cli_simulate_fit_roundtrip(tmp_path):
    simdoc = {"mode": "simulate", "model": {**STUDY_DGP, "T": 90}, "seed": 10}
    simcfg = tmp_path / "sim.json"
    simcfg.write_text(json.dumps(simdoc))
    out = tmp_path / "simout"
    assert main(["simulate", "--config", str(simcfg), "--out", str(out)]) == 0
    y = mg.ingest_csv(str(out / "series.csv"))
    assert y.T == 90
    # identical roundtrip
    y2, _ = mg.simulate_dgp(mg.make_params([0.06, -0.09], [0.30, 2.00], [0.35, 0.10],
                                           [0.20, 0.60],
                                           np.array([[0.98, 0.04], [0.02, 0.96]])),
                            90, seed=10)
    assert np.array_equal(y.y, y2.y)

    fitdoc = _fit_doc(sweeps=40, burn_in=10,
                      io={"input": str(out / "series.csv"),
                          "truth": str(out / "true_path.csv"),
                          "out": str(tmp_path / "fitout")})
    fitcfg = tmp_path / "fit.json"
    fitcfg.write_text(json.dumps(fitdoc))
    assert main(["fit", "--config", str(fitcfg)]) == 0
    assert (tmp_path / "fitout" / "trace_0.csv").exists()
    assert (tmp_path / "fitout" / "config_echo.json").exists()

    # diagnose over the fit output
    diadoc = {"mode": "diagnose", "io": {"out": str(tmp_path / "fitout")}}
    diacfg = tmp_path / "dia.json"
    diacfg.write_text(json.dumps(diadoc))
    assert main(["diagnose", "--config", str(diacfg)]) == 0
    assert (tmp_path / "fitout" / "kde_mu_1.csv").exists()


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["fit", "--config", str(bad)]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(_fit_doc(sampler={"kind": "bogus"})))
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    # data failure -> numeric exit code
    data = tmp_path / "bad.csv"
    data.write_text("y\n0.1\nnot-a-number\n")
    cfg2 = tmp_path / "cfg2.json"
    cfg2.write_text(json.dumps(_fit_doc(io={"input": str(data),
                                            "out": str(tmp_path / "o2")})))
    assert main(["fit", "--config", str(cfg2)]) == 3
    # config without output dir
    cfg3 = tmp_path / "cfg3.json"
    cfg3.write_text(json.dumps(_fit_doc()))
    assert main(["fit", "--config", str(cfg3)]) == 2
