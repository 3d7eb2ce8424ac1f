"""Markov-switching GARCH model: parameters, simulation and exact densities.

The observable follows a per-regime GARCH(1,1) with a switching constant
mean; the regime is a first-order M-state Markov chain.  The conditional
variance recursion threads through the realized regime history, so the exact
likelihood is only computable by summing over all M**T paths — which is what
:func:`exact_likelihood_enumerate` does, as a small-T test oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import path_logdensity_kernel, variance_path_kernel
from .stochastics import RandomStream, categorical_from_uniform

ENUMERATION_GUARD = 2 ** 20


@dataclass(frozen=True)
class RegimeParams:
    """Per-regime mean and GARCH(1,1) coefficients."""

    mu: float
    gamma: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic transition matrix: p[i, j] = Pr(next = i | prev = j)."""

    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        colsums = p.sum(axis=0)
        if np.any(np.abs(colsums - 1.0) > 1e-12):
            raise ValueError(f"columns must sum to 1, got sums {colsums}")
        object.__setattr__(self, "p", p)

    @property
    def M(self) -> int:
        return self.p.shape[0]

    def stationary(self) -> np.ndarray:
        return stationary_distribution(self.p)


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    """Stationary law of a column-stochastic chain: solve P pi = pi, sum = 1.

    Reducible chains have no unique answer; the minimum-norm solution is
    returned, which spreads mass evenly over closed classes.
    """
    p = np.asarray(p, dtype=float)
    M = p.shape[0]
    a = np.vstack([p - np.eye(M), np.ones((1, M))])
    b = np.zeros(M + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    s = pi.sum()
    if s <= 0:
        return np.full(M, 1.0 / M)
    return pi / s


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set: M regimes plus the transition matrix.

    Identifiability across regimes is enforced only through prior supports,
    not here.  Flat coefficient arrays are cached for the kernels.
    """

    regimes: tuple[RegimeParams, ...]
    trans: TransitionMatrix
    mu_vec: np.ndarray = field(init=False, repr=False)
    gamma_vec: np.ndarray = field(init=False, repr=False)
    alpha_vec: np.ndarray = field(init=False, repr=False)
    beta_vec: np.ndarray = field(init=False, repr=False)
    log_trans: np.ndarray = field(init=False, repr=False)
    pi0: np.ndarray = field(init=False, repr=False)
    log_pi0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        regimes = tuple(self.regimes)
        object.__setattr__(self, "regimes", regimes)
        if len(regimes) != self.trans.M:
            raise ValueError("number of regimes must match transition dimension")
        object.__setattr__(self, "mu_vec", np.array([r.mu for r in regimes]))
        object.__setattr__(self, "gamma_vec", np.array([r.gamma for r in regimes]))
        object.__setattr__(self, "alpha_vec", np.array([r.alpha for r in regimes]))
        object.__setattr__(self, "beta_vec", np.array([r.beta for r in regimes]))
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "log_trans", np.log(self.trans.p))
        pi0 = self.trans.stationary()
        object.__setattr__(self, "pi0", pi0)
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "log_pi0", np.log(pi0))

    @property
    def M(self) -> int:
        return len(self.regimes)

    def replace_regime(self, k: int, new: RegimeParams) -> "ModelParams":
        regs = list(self.regimes)
        regs[k] = new
        return ModelParams(tuple(regs), self.trans)

    def replace_trans(self, trans: TransitionMatrix) -> "ModelParams":
        return ModelParams(self.regimes, trans)


@dataclass(frozen=True)
class ObservationSeries:
    """Observed return series."""

    y: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size < 1:
            raise ValueError("series must have at least one observation")
        if not np.all(np.isfinite(y)):
            raise ValueError("series contains non-finite values")
        object.__setattr__(self, "y", y)

    @property
    def T(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class StatePath:
    """Regime trajectory, stored as 0-based indices; one-hot view on demand."""

    regimes: np.ndarray
    M: int

    def __post_init__(self) -> None:
        reg = np.asarray(self.regimes, dtype=np.int64).ravel()
        if reg.size < 1:
            raise ValueError("path must have at least one step")
        if np.any(reg < 0) or np.any(reg >= self.M):
            raise ValueError("regime indices out of range")
        object.__setattr__(self, "regimes", reg)

    @property
    def T(self) -> int:
        return self.regimes.shape[0]

    @property
    def xi(self) -> np.ndarray:
        out = np.zeros((self.T, self.M))
        out[np.arange(self.T), self.regimes] = 1.0
        return out

    @classmethod
    def from_xi(cls, xi: np.ndarray) -> "StatePath":
        xi = np.asarray(xi, dtype=float)
        if xi.ndim != 2:
            raise ValueError("xi must be T x M")
        ok = np.all(np.isin(xi, (0.0, 1.0))) and np.all(xi.sum(axis=1) == 1.0)
        if not ok:
            raise ValueError("xi rows must be one-hot indicators")
        return cls(np.argmax(xi, axis=1), xi.shape[1])


@dataclass(frozen=True)
class VarianceInit:
    """Initial conditional variance of the recursion."""

    sigma1_sq: float

    def __post_init__(self) -> None:
        if not self.sigma1_sq > 0:
            raise ValueError("sigma1_sq must be > 0")


def _check_dims(y: ObservationSeries, xi: StatePath, theta: ModelParams) -> None:
    if xi.T != y.T:
        raise ValueError(f"path length {xi.T} != series length {y.T}")
    if xi.M != theta.M:
        raise ValueError(f"path has {xi.M} regimes, model has {theta.M}")


def variance_path(y: ObservationSeries, xi: StatePath, theta: ModelParams,
                  init: VarianceInit) -> np.ndarray:
    """Conditional variance recursion along a fixed regime path."""
    _check_dims(y, xi, theta)
    out = np.empty(y.T)
    variance_path_kernel(y.y, xi.regimes, theta.mu_vec, theta.gamma_vec,
                         theta.alpha_vec, theta.beta_vec, init.sigma1_sq, out)
    bad = np.flatnonzero(~np.isfinite(out) | (out <= 0.0))
    if bad.size:
        raise FloatingPointError(f"variance recursion left (0, inf) at t={bad[0]}")
    return out


def transition_logprob(xi_t: np.ndarray, xi_prev: np.ndarray,
                       trans: TransitionMatrix) -> float:
    """log Pr(state i at t | state j at t-1) for one-hot rows."""
    xi_t = np.asarray(xi_t, dtype=float).ravel()
    xi_prev = np.asarray(xi_prev, dtype=float).ravel()
    for v in (xi_t, xi_prev):
        if v.shape[0] != trans.M or not np.all(np.isin(v, (0.0, 1.0))) or v.sum() != 1.0:
            raise ValueError("inputs must be one-hot rows of length M")
    i = int(np.argmax(xi_t))
    j = int(np.argmax(xi_prev))
    p = trans.p[i, j]
    return np.log(p) if p > 0 else -np.inf


def path_conditional_logdensity(y: ObservationSeries, xi: StatePath,
                                theta: ModelParams, init: VarianceInit) -> float:
    """log f(y_{1:T}, path | theta), with the stationary law for the first state."""
    _check_dims(y, xi, theta)
    return float(path_logdensity_kernel(y.y, xi.regimes, theta.mu_vec,
                                        theta.gamma_vec, theta.alpha_vec,
                                        theta.beta_vec, theta.log_trans,
                                        theta.log_pi0, init.sigma1_sq))


def exact_likelihood_enumerate(y: ObservationSeries, theta: ModelParams,
                               init: VarianceInit) -> float:
    """log f(y_{1:T} | theta) by summation over every regime path.

    Test oracle only: cost is M**T, guarded at 2**20 paths.
    """
    M, T = theta.M, y.T
    n_paths = M ** T
    if n_paths > ENUMERATION_GUARD:
        raise ValueError(
            f"M**T = {n_paths} exceeds the enumeration guard ({ENUMERATION_GUARD}); "
            "this routine is a small-T oracle, use the forward filter instead")
    idx = np.arange(n_paths)
    mu, ga, al, be = theta.mu_vec, theta.gamma_vec, theta.alpha_vec, theta.beta_vec
    s = (idx // M ** 0) % M
    sig2 = np.full(n_paths, init.sigma1_sq)
    ll = theta.log_pi0[s] - 0.5 * (np.log(2 * np.pi * sig2) + (y.y[0] - mu[s]) ** 2 / sig2)
    eps = y.y[0] - mu[s]
    for t in range(1, T):
        sp = s
        s = (idx // M ** t) % M
        ll = ll + theta.log_trans[s, sp]
        sig2 = ga[s] + al[s] * eps * eps + be[s] * sig2
        ll = ll - 0.5 * (np.log(2 * np.pi * sig2) + (y.y[t] - mu[s]) ** 2 / sig2)
        eps = y.y[t] - mu[s]
    mx = np.max(ll)
    if mx == -np.inf:
        return -np.inf
    return float(mx + np.log(np.sum(np.exp(ll - mx))))


def enumerate_path_logdensities(y: ObservationSeries, theta: ModelParams,
                                init: VarianceInit) -> tuple[np.ndarray, np.ndarray]:
    """All M**T paths (rows) with their joint log densities; oracle helper."""
    M, T = theta.M, y.T
    n_paths = M ** T
    if n_paths > ENUMERATION_GUARD:
        raise ValueError("enumeration guard exceeded")
    paths = np.empty((n_paths, T), dtype=np.int64)
    idx = np.arange(n_paths)
    for t in range(T):
        paths[:, t] = (idx // M ** t) % M
    ll = np.array([
        path_conditional_logdensity(y, StatePath(paths[i], M), theta, init)
        for i in range(n_paths)
    ])
    return paths, ll


def simulate_dgp(theta: ModelParams, T: int, seed: int,
                 burn_in: int = 500, s1: int | None = None,
                 stream_id: int = 0) -> tuple[ObservationSeries, StatePath]:
    """Simulate T observations from the switching GARCH data generator.

    The chain starts from the stationary law (or a forced first regime
    ``s1``), runs ``burn_in`` presample steps to wash out the variance
    initialization, and returns the last T steps.  Deterministic given
    ``seed``/``stream_id``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = RandomStream(seed, stream_id)
    M = theta.M
    n = T + burn_in
    mu, ga, al, be = theta.mu_vec, theta.gamma_vec, theta.alpha_vec, theta.beta_vec
    p = theta.trans.p
    reg = np.empty(n, dtype=np.int64)
    yv = np.empty(n)
    u = rng.generator.random(n)
    eta = rng.generator.standard_normal(n)
    reg[0] = s1 if s1 is not None else categorical_from_uniform(theta.pi0, u[0])
    s = reg[0]
    persistence = al[s] + be[s]
    sig2 = ga[s] / (1.0 - persistence) if persistence < 1.0 else 1.0
    yv[0] = mu[s] + np.sqrt(sig2) * eta[0]
    eps = yv[0] - mu[s]
    for t in range(1, n):
        s = categorical_from_uniform(p[:, reg[t - 1]], u[t])
        reg[t] = s
        sig2 = ga[s] + al[s] * eps * eps + be[s] * sig2
        yv[t] = mu[s] + np.sqrt(sig2) * eta[t]
        eps = yv[t] - mu[s]
    return (ObservationSeries(yv[burn_in:]), StatePath(reg[burn_in:], M))


def series_to_csv(y: ObservationSeries, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"])
        for v in y.y:
            w.writerow([repr(float(v))])


def series_from_csv(path: str) -> ObservationSeries:
    """Strict single-column numeric CSV with header ``y``."""
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [h.strip() for h in header] != ["y"]:
            raise ValueError(f"{path}: expected single header column 'y', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1:
                raise ValueError(f"{path}: line {lineno}: expected one column")
            try:
                values.append(float(row[0]))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric value {row[0]!r}")
    if not values:
        raise ValueError(f"{path}: no data rows")
    return ObservationSeries(np.array(values))


def path_to_csv(xi: StatePath, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["regime"])
        for r in xi.regimes:
            w.writerow([int(r) + 1])


def path_from_csv(path: str, M: int) -> StatePath:
    values: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [h.strip() for h in header] != ["regime"]:
            raise ValueError(f"{path}: expected single header column 'regime'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values.append(int(row[0]) - 1)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer regime {row[0]!r}")
    return StatePath(np.array(values, dtype=np.int64), M)


def make_params(mu: Sequence[float], gamma: Sequence[float], alpha: Sequence[float],
                beta: Sequence[float], trans: np.ndarray) -> ModelParams:
    """Convenience constructor from coefficient sequences."""
    regimes = tuple(RegimeParams(m, g, a, b)
                    for m, g, a, b in zip(mu, gamma, alpha, beta, strict=True))
    return ModelParams(regimes, TransitionMatrix(np.asarray(trans, dtype=float)))
