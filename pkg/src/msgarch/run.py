"""Experiment orchestration: config, the Gibbs loop, persistence, comparison.

A run cycles three blocks per sweep — states (one filter pass feeding the
configured trajectory sampler), transition columns, then per-regime mean and
volatility-triple updates — and records the kept draws plus acceptance
counters.  Identical config and seed reproduce output files byte for byte;
wall times live only in the provenance section.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .auxiliary import AuxKind
from .chain import ChainState
from .diagnostics import ChainTrace, classify_regimes, inefficiency_factor, mse, \
    relative_inefficiency, summary_stats
from .ffbs import backward_sample, forward_filter
from .model import (ModelParams, ObservationSeries, StatePath, TransitionMatrix,
                    VarianceInit, make_params, path_from_csv, path_to_csv,
                    series_from_csv, series_to_csv, simulate_dgp)
from .param_samplers import PriorSpec, count_transitions, sample_transition, \
    update_garch_block, update_mu
from .state_samplers import SAMPLER_KINDS, mctm_update, mtm_update, mtmis_update, \
    single_move_sweep
from .stochastics import RandomStream


class ConfigError(ValueError):
    """Bad run configuration (CLI exit code 2)."""


DEFAULT_PRIOR_M2 = {
    "dirichlet_nu": [[1.0, 1.0], [1.0, 1.0]],
    "support_mu": [[0.02, 0.15], [-0.35, 0.18]],
    "support_gamma": [[0.15, 0.45], [0.50, 4.00]],
    "support_alpha": [[0.10, 0.50], [0.02, 0.35]],
    "support_beta": [[0.05, 0.40], [0.35, 0.85]],
}


@dataclass(frozen=True)
class SamplerSpec:
    kind: str
    K: int = 2
    aux: AuxKind = AuxKind.K
    param_tries: int = 1

    def __post_init__(self) -> None:
        if self.kind not in SAMPLER_KINDS:
            raise ConfigError(f"unknown sampler kind {self.kind!r}; "
                              f"expected one of {SAMPLER_KINDS}")
        if self.kind in ("mtm", "mtmis") and self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.kind == "mctm" and self.K not in (2, 3):
            raise ConfigError("mctm requires K in {2, 3}")
        if self.param_tries < 1:
            raise ConfigError("param_tries must be >= 1")

    @property
    def label(self) -> str:
        if self.kind == "single-move":
            return self.kind
        return f"{self.kind}-K{self.K}-{self.aux.value}"


@dataclass(frozen=True)
class RunConfig:
    mode: str
    M: int
    prior: PriorSpec
    sampler: SamplerSpec
    sweeps: int
    burn_in: int
    seed: int
    chains: int
    model: ModelParams | None = None
    sim_T: int = 0
    sigma1_sq: float | None = None
    input_path: str | None = None
    out_dir: str | None = None
    samplers: tuple[SamplerSpec, ...] = ()
    truth_path: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("simulate", "fit", "diagnose", "compare"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not (self.sweeps > self.burn_in >= 0):
            raise ConfigError("need sweeps > burn_in >= 0")
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if self.M < 1:
            raise ConfigError("M must be >= 1")


def _parse_sampler(d: dict, M: int) -> SamplerSpec:
    try:
        aux = AuxKind.parse(d.get("aux", "klaassen"))
    except ValueError as e:
        raise ConfigError(str(e))
    return SamplerSpec(kind=d.get("kind", "mtm"), K=int(d.get("K", 2)), aux=aux,
                       param_tries=int(d.get("param_tries", 1)))


def _parse_model(d: dict, M: int) -> ModelParams | None:
    regimes = d.get("regimes")
    trans = d.get("transition")
    if regimes is None and trans is None:
        return None
    if regimes is None or trans is None:
        raise ConfigError("model must give both regimes and transition, or neither")
    if len(regimes) != M:
        raise ConfigError(f"expected {M} regime entries, got {len(regimes)}")
    try:
        return make_params(
            mu=[r["mu"] for r in regimes],
            gamma=[r["gamma"] for r in regimes],
            alpha=[r["alpha"] for r in regimes],
            beta=[r["beta"] for r in regimes],
            trans=np.asarray(trans, dtype=float),
        )
    except (KeyError, ValueError) as e:
        raise ConfigError(f"bad model block: {e}")


def parse_config(doc: dict) -> RunConfig:
    """Validate a JSON config document into a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    mode = doc.get("mode")
    if mode is None:
        raise ConfigError("config needs a 'mode'")
    model_block = doc.get("model", {})
    M = int(model_block.get("M", 2))
    prior_block = dict(DEFAULT_PRIOR_M2) if M == 2 else None
    if "prior" in doc:
        base = prior_block or {}
        base.update(doc["prior"])
        prior_block = base
    if prior_block is None:
        raise ConfigError("prior block is required when M != 2")
    try:
        prior = PriorSpec(
            dirichlet_nu=np.asarray(prior_block["dirichlet_nu"], dtype=float),
            support_mu=np.asarray(prior_block["support_mu"], dtype=float),
            support_gamma=np.asarray(prior_block["support_gamma"], dtype=float),
            support_alpha=np.asarray(prior_block["support_alpha"], dtype=float),
            support_beta=np.asarray(prior_block["support_beta"], dtype=float),
        )
    except (KeyError, ValueError) as e:
        raise ConfigError(f"bad prior block: {e}")
    if prior.M != M:
        raise ConfigError("prior dimension does not match model M")
    sampler = _parse_sampler(doc.get("sampler", {}), M)
    samplers = tuple(_parse_sampler(s, M) for s in doc.get("samplers", []))
    io = doc.get("io", {})
    sweeps = int(doc.get("sweeps", 10000))
    burn_in = int(doc.get("burn_in", sweeps // 5))
    sig = doc.get("sigma1_sq")
    try:
        cfg = RunConfig(
            mode=mode,
            M=M,
            prior=prior,
            sampler=sampler,
            sweeps=sweeps,
            burn_in=burn_in,
            seed=int(doc.get("seed", 0)),
            chains=int(doc.get("chains", 1)),
            model=_parse_model(model_block, M),
            sim_T=int(model_block.get("T", 0)),
            sigma1_sq=float(sig) if sig is not None else None,
            input_path=io.get("input"),
            out_dir=io.get("out"),
            samplers=samplers,
            truth_path=io.get("truth"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}")
    if cfg.mode == "simulate" and (cfg.model is None or cfg.sim_T < 1):
        raise ConfigError("simulate mode needs model parameters and model.T >= 1")
    if cfg.mode == "compare" and len(cfg.samplers) < 2:
        raise ConfigError("compare mode needs at least two sampler specs")
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    return parse_config(doc)


def _midpoint_params(prior: PriorSpec) -> ModelParams:
    mid = lambda s: (s[:, 0] + s[:, 1]) / 2.0
    M = prior.M
    trans = prior.dirichlet_nu / prior.dirichlet_nu.sum(axis=0, keepdims=True)
    return make_params(mid(prior.support_mu), mid(prior.support_gamma),
                       mid(prior.support_alpha), mid(prior.support_beta), trans)


TRACE_STATE_LABEL = "state"


def monitored_columns(M: int) -> tuple[str, ...]:
    cols = [f"pi_{m + 1}{m + 1}" for m in range(M)]
    for name in ("mu", "gamma", "alpha", "beta"):
        cols += [f"{name}_{m + 1}" for m in range(M)]
    cols.append("max_sigma2")
    return tuple(cols)


def _monitor_row(chain: ChainState) -> list[float]:
    th = chain.params
    row = [th.trans.p[m, m] for m in range(th.M)]
    row += list(th.mu_vec) + list(th.gamma_vec) + list(th.alpha_vec) + list(th.beta_vec)
    row.append(float(np.max(chain.sigma2)))
    return row


@dataclass
class RunResult:
    traces: list[ChainTrace]
    state_mean: np.ndarray
    config_echo: dict
    columns: tuple[str, ...]
    provenance: dict = field(default_factory=dict)

    def pooled(self) -> np.ndarray:
        return np.vstack([t.draws for t in self.traces])


def _state_update(chain: ChainState, spec: SamplerSpec, init: VarianceInit,
                  rng: RandomStream) -> bool:
    if spec.kind == "single-move":
        single_move_sweep(chain, chain.y, rng)
        return True
    fo = forward_filter(chain.y, chain.params, spec.aux, init)
    if spec.kind == "mtm":
        _, report = mtm_update(chain, fo, spec.K, rng)
    elif spec.kind == "mtmis":
        _, report = mtmis_update(chain, fo, spec.K, rng)
    else:
        _, report = mctm_update(chain, fo, spec.K, rng)
    return report.accepted


def gibbs_run(cfg: RunConfig, y: ObservationSeries,
              sampler: SamplerSpec | None = None) -> RunResult:
    """Run the full Gibbs cycle; one ChainTrace per configured chain."""
    spec = sampler or cfg.sampler
    init = VarianceInit(cfg.sigma1_sq if cfg.sigma1_sq is not None
                        else float(np.var(y.y)))
    cols = monitored_columns(cfg.M)
    kept = cfg.sweeps - cfg.burn_in
    traces: list[ChainTrace] = []
    occupancy = np.zeros((y.T, cfg.M))
    for chain_id in range(cfg.chains):
        rng = RandomStream(cfg.seed, chain_id)
        params = cfg.model if cfg.model is not None else _midpoint_params(cfg.prior)
        fo = forward_filter(y, params, spec.aux, init)
        path, _ = backward_sample(fo, params.trans, rng.generator.random(y.T))
        chain = ChainState(y=y, params=params, path=path, init=init)
        draws = np.empty((kept, len(cols)))
        counters = {"state_accept": 0, "sweeps": cfg.sweeps, "garch_fallback": 0}
        for k in range(cfg.M):
            counters[f"mu_accept_{k + 1}"] = 0
            counters[f"garch_accept_{k + 1}"] = 0
        t0 = time.perf_counter()
        for sweep in range(cfg.sweeps):
            try:
                accepted = _state_update(chain, spec, init, rng)
                counters["state_accept"] += int(accepted)
                counts = count_transitions(chain.path)
                chain.set_params(chain.params.replace_trans(
                    sample_transition(counts, cfg.prior, rng)))
                for k in range(cfg.M):
                    _, acc = update_mu(chain, k, y, cfg.prior, rng,
                                       n_tries=spec.param_tries)
                    counters[f"mu_accept_{k + 1}"] += int(acc)
                for k in range(cfg.M):
                    _, acc, fb = update_garch_block(chain, k, y, cfg.prior, rng)
                    counters[f"garch_accept_{k + 1}"] += int(acc)
                    counters["garch_fallback"] += int(fb)
            except Exception as e:
                raise RuntimeError(
                    f"sweep {sweep} failed in chain {chain_id}: {e}") from e
            if sweep >= cfg.burn_in:
                draws[sweep - cfg.burn_in] = _monitor_row(chain)
                occupancy[np.arange(y.T), chain.path.regimes] += 1.0
        wall = time.perf_counter() - t0
        traces.append(ChainTrace(draws=draws, columns=cols,
                                 accept_counts=counters, wall_time=wall))
    state_mean = occupancy / (kept * cfg.chains)
    return RunResult(traces=traces, state_mean=state_mean, columns=cols,
                     config_echo={"sampler": spec.label, "sweeps": cfg.sweeps,
                                  "burn_in": cfg.burn_in, "seed": cfg.seed,
                                  "chains": cfg.chains,
                                  "sigma1_sq": init.sigma1_sq},
                     provenance={"version": __version__,
                                 "wall_times": [t.wall_time for t in traces]})


def ingest_csv(path: str) -> ObservationSeries:
    return series_from_csv(path)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _fmt(v: float) -> str:
    return repr(float(v))


def emit_results(res: RunResult, out_dir: str, dgp: ModelParams | None = None,
                 prior: PriorSpec | None = None,
                 truth: StatePath | None = None) -> list[str]:
    """Write traces, summary, state means and diagnostics; returns file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    for i, tr in enumerate(res.traces):
        p = out / f"trace_{i}.csv"
        _write_csv(p, list(tr.columns),
                   ([_fmt(v) for v in row] for row in tr.draws))
        written.append(p.name)
    pooled = res.pooled()
    dgp_vals = _dgp_values(dgp, len(res.columns)) if dgp is not None else None
    prior_bounds = _prior_bounds(prior, res.columns) if prior is not None else None
    rows = []
    for j, name in enumerate(res.columns):
        row = [name,
               _fmt(dgp_vals[j]) if dgp_vals is not None and np.isfinite(dgp_vals[j]) else "",
               _fmt(prior_bounds[j][0]) if prior_bounds else "",
               _fmt(prior_bounds[j][1]) if prior_bounds else "",
               _fmt(pooled[:, j].mean()), _fmt(pooled[:, j].std(ddof=1))]
        rows.append(row)
    _write_csv(out / "summary.csv",
               ["parameter", "dgp_value", "prior_low", "prior_high", "mean", "sd"], rows)
    written.append("summary.csv")
    _write_csv(out / "state_means.csv",
               [f"regime_{m + 1}" for m in range(res.state_mean.shape[1])],
               ([_fmt(v) for v in row] for row in res.state_mean))
    written.append("state_means.csv")
    diag = {"acceptance": [t.accept_counts for t in res.traces],
            "columns": list(res.columns),
            "summary": {}, "inefficiency": {}}
    R = res.traces[0].draws.shape[0]
    L = min(500, max(1, R // 10))
    for j, name in enumerate(res.columns):
        x = pooled[:, j]
        try:
            diag["summary"][name] = summary_stats(x)
        except ValueError:
            diag["summary"][name] = None
        try:
            diag["inefficiency"][name] = inefficiency_factor(res.traces[0].column(name), L)
        except ValueError:
            diag["inefficiency"][name] = None
    if truth is not None and res.state_mean.shape[1] == 2:
        diag["classification"] = classify_regimes(res.state_mean[:, 1], truth)
    diag["provenance"] = res.provenance
    diag["config"] = res.config_echo
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(diag, fh, indent=1, sort_keys=True)
    written.append("diagnostics.json")
    with open(out / "config_echo.json", "w") as fh:
        json.dump(res.config_echo, fh, indent=1, sort_keys=True)
    written.append("config_echo.json")
    return written


def _dgp_values(dgp: ModelParams, ncols: int) -> np.ndarray:
    vals = [dgp.trans.p[m, m] for m in range(dgp.M)]
    vals += list(dgp.mu_vec) + list(dgp.gamma_vec) + list(dgp.alpha_vec) \
        + list(dgp.beta_vec)
    vals.append(np.nan)  # max_sigma2 has no DGP reference
    return np.array(vals[:ncols])


def _prior_bounds(prior: PriorSpec, columns) -> list[tuple[float, float]]:
    M = prior.M
    bounds = [(0.0, 1.0)] * M
    for sup in (prior.support_mu, prior.support_gamma, prior.support_alpha,
                prior.support_beta):
        bounds += [(sup[m, 0], sup[m, 1]) for m in range(M)]
    bounds.append((0.0, np.inf))
    return bounds


def run_compare(cfg: RunConfig, y: ObservationSeries,
                truth: StatePath | None = None) -> dict:
    """Run every configured sampler on shared data; tabulate MSE, IF and RI.

    The relative-inefficiency baseline is the single-move run when present,
    otherwise the first sampler in the list.
    """
    if len(cfg.samplers) < 2:
        raise ConfigError("compare needs at least two samplers")
    results: dict[str, RunResult] = {}
    baseline = None
    for i, spec in enumerate(cfg.samplers):
        label = spec.label
        if label in results:
            label = f"{label}#{i}"
        results[label] = gibbs_run(cfg, y, sampler=spec)
        if baseline is None and spec.kind == "single-move":
            baseline = label
    labels = list(results)
    if baseline is None:
        baseline = labels[0]
    report: dict = {"labels": labels, "baseline": baseline,
                    "columns": list(monitored_columns(cfg.M))}
    param_cols = report["columns"][:-1]  # max_sigma2 has no DGP value
    if cfg.model is not None:
        true_vec = _dgp_values(cfg.model, len(param_cols))
        report["mse"] = {
            lab: mse(results[lab].pooled()[:, :len(param_cols)].mean(axis=0), true_vec)
            for lab in labels}
    means = {lab: results[lab].pooled().mean(axis=0) for lab in labels}
    sds = {lab: results[lab].pooled().std(axis=0, ddof=1) for lab in labels}
    report["posterior_mean"] = {lab: means[lab].tolist() for lab in labels}
    report["posterior_sd"] = {lab: sds[lab].tolist() for lab in labels}
    iffs: dict[str, list[float]] = {}
    for lab in labels:
        tr = results[lab].traces[0]
        L = min(500, max(1, tr.draws.shape[0] // 10))
        vals = []
        for name in results[lab].columns:
            try:
                vals.append(inefficiency_factor(tr.column(name), L))
            except ValueError:
                vals.append(float("nan"))
        iffs[lab] = vals
    report["inefficiency"] = iffs
    times = {lab: float(np.sum(results[lab].provenance["wall_times"]))
             for lab in labels}
    report["wall_time"] = times
    report["ri"] = {}
    for lab in labels:
        if lab == baseline:
            continue
        ri = []
        for j in range(len(report["columns"])):
            ia, ib = iffs[baseline][j], iffs[lab][j]
            if np.isfinite(ia) and np.isfinite(ib) and ia > 0 and ib > 0:
                ri.append(relative_inefficiency(ia, times[baseline], ib, times[lab]))
            else:
                ri.append(float("nan"))
        report["ri"][lab] = ri
    if truth is not None and cfg.M == 2:
        report["classification"] = {
            lab: classify_regimes(results[lab].state_mean[:, 1], truth)
            for lab in labels}
    report["acceptance"] = {
        lab: results[lab].traces[0].accept_counts for lab in labels}
    report["_results"] = results
    return report


def emit_compare(report: dict, out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = report["labels"]
    cols = report["columns"]
    rows = [[name] + [_fmt(report["posterior_mean"][lab][j]) for lab in labels]
            + [_fmt(report["posterior_sd"][lab][j]) for lab in labels]
            for j, name in enumerate(cols)]
    _write_csv(out / "compare_params.csv",
               ["parameter"] + [f"mean_{lab}" for lab in labels]
               + [f"sd_{lab}" for lab in labels], rows)
    if "mse" in report:
        _write_csv(out / "compare_mse.csv", ["sampler", "mse"],
                   [[lab, _fmt(report["mse"][lab])] for lab in labels])
    _write_csv(out / "compare_if.csv", ["parameter"] + labels,
               [[name] + [_fmt(report["inefficiency"][lab][j]) for lab in labels]
                for j, name in enumerate(cols)])
    ri_labels = [lab for lab in labels if lab != report["baseline"]]
    _write_csv(out / "compare_ri.csv", ["parameter"] + ri_labels,
               [[name] + [_fmt(report["ri"][lab][j]) for lab in ri_labels]
                for j, name in enumerate(cols)])
    if "classification" in report:
        _write_csv(out / "compare_classification.csv", ["sampler", "fraction_correct"],
                   [[lab, _fmt(report["classification"][lab])] for lab in labels])
    clean = {k: v for k, v in report.items() if k != "_results"}
    with open(out / "compare.json", "w") as fh:
        json.dump(clean, fh, indent=1, sort_keys=True)


def run_simulate(cfg: RunConfig) -> tuple[ObservationSeries, StatePath]:
    if cfg.model is None or cfg.sim_T < 1:
        raise ConfigError("simulate mode needs model parameters and model.T")
    return simulate_dgp(cfg.model, cfg.sim_T, cfg.seed)


def emit_simulation(y: ObservationSeries, path: StatePath, out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series_to_csv(y, str(out / "series.csv"))
    path_to_csv(path, str(out / "true_path.csv"))


def run_diagnose(cfg: RunConfig) -> dict:
    """Recompute diagnostics plus density/ACF grids from stored traces."""
    from .diagnostics import acf, kde
    if cfg.out_dir is None:
        raise ConfigError("diagnose mode needs io.out pointing at a fit output")
    out = Path(cfg.out_dir)
    traces = sorted(out.glob("trace_*.csv"))
    if not traces:
        raise ConfigError(f"no trace files found under {out}")
    with open(traces[0], newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    report: dict = {"columns": header, "summary": {}, "inefficiency": {}}
    L = min(500, max(1, data.shape[0] // 10))
    for j, name in enumerate(header):
        x = data[:, j]
        try:
            report["summary"][name] = summary_stats(x)
            report["inefficiency"][name] = inefficiency_factor(x, L)
            grid, dens = kde(x, 256)
            _write_csv(out / f"kde_{name}.csv", ["grid", "density"],
                       ([_fmt(g), _fmt(d)] for g, d in zip(grid, dens)))
            rho = acf(x, L)
            _write_csv(out / f"acf_{name}.csv", ["lag", "acf"],
                       ([str(l + 1), _fmt(r)] for l, r in enumerate(rho)))
        except ValueError:
            report["summary"][name] = None
            report["inefficiency"][name] = None
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    return report
