"""Full-conditional updates for the model parameters.

Transition columns are conjugate Dirichlet draws.  Regime means and GARCH
coefficient triples get Metropolis updates whose proposals come from the
auxiliary ARMA representation of the squared errors (normal for the mean,
first-order-Taylor trivariate normal for the volatility triple, truncated to
the prior box); the accept step always targets the exact path-conditional
posterior, so proposal quality affects efficiency only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln, ndtr, ndtri

from ._kernels import garch_taylor_kernel, variance_path_kernel
from .chain import ChainState
from .model import ModelParams, ObservationSeries, RegimeParams, StatePath, TransitionMatrix
from .stochastics import (RandomStream, draw_dirichlet, draw_trunc_normal,
                          trunc_normal_logpdf)


@dataclass(frozen=True)
class PriorSpec:
    """Dirichlet transition prior plus per-parameter uniform supports.

    Supports are chosen disjoint/ordered to pin regime labels; they must keep
    gamma positive and alpha, beta nonnegative.
    """

    dirichlet_nu: np.ndarray
    support_mu: np.ndarray
    support_gamma: np.ndarray
    support_alpha: np.ndarray
    support_beta: np.ndarray

    def __post_init__(self) -> None:
        nu = np.asarray(self.dirichlet_nu, dtype=float)
        if nu.ndim != 2 or nu.shape[0] != nu.shape[1] or np.any(nu <= 0):
            raise ValueError("dirichlet_nu must be a square positive matrix")
        object.__setattr__(self, "dirichlet_nu", nu)
        M = nu.shape[0]
        for name in ("support_mu", "support_gamma", "support_alpha", "support_beta"):
            s = np.asarray(getattr(self, name), dtype=float)
            if s.shape != (M, 2):
                raise ValueError(f"{name} must be M x 2 [low, high] pairs")
            if np.any(s[:, 0] >= s[:, 1]):
                raise ValueError(f"{name} needs low < high everywhere")
            object.__setattr__(self, name, s)
        if np.any(self.support_gamma[:, 0] <= 0):
            raise ValueError("gamma supports must lie in (0, inf)")
        if np.any(self.support_alpha[:, 0] < 0) or np.any(self.support_beta[:, 0] < 0):
            raise ValueError("alpha and beta supports must lie in [0, inf)")

    @property
    def M(self) -> int:
        return self.dirichlet_nu.shape[0]


@dataclass(frozen=True)
class TransitionCounts:
    """n[i, j] = number of j -> i transitions along a path."""

    n: np.ndarray


def count_transitions(path: StatePath) -> TransitionCounts:
    if path.T < 2:
        raise ValueError("need at least two time steps to count transitions")
    M = path.M
    n = np.zeros((M, M), dtype=np.int64)
    np.add.at(n, (path.regimes[1:], path.regimes[:-1]), 1)
    return TransitionCounts(n)


def sample_transition(counts: TransitionCounts, prior: PriorSpec,
                      rng: RandomStream) -> TransitionMatrix:
    """Conjugate draw: column j ~ Dirichlet(counts[:, j] + nu[:, j])."""
    M = prior.M
    p = np.empty((M, M))
    for j in range(M):
        p[:, j] = draw_dirichlet(rng, counts.n[:, j] + prior.dirichlet_nu[:, j])
        p[:, j] /= p[:, j].sum()
    return TransitionMatrix(p)


def prior_logdensity(theta: ModelParams, prior: PriorSpec) -> float:
    """Dirichlet log density per transition column plus uniform support indicators."""
    val = 0.0
    nu = prior.dirichlet_nu
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(theta.M):
            col = theta.trans.p[:, j]
            a = nu[:, j]
            val += gammaln(a.sum()) - gammaln(a).sum()
            terms = np.where(a == 1.0, 0.0, (a - 1.0) * np.log(col))
            val += terms.sum()
    for k in range(theta.M):
        r = theta.regimes[k]
        for value, (lo, hi) in ((r.mu, prior.support_mu[k]),
                                (r.gamma, prior.support_gamma[k]),
                                (r.alpha, prior.support_alpha[k]),
                                (r.beta, prior.support_beta[k])):
            if not lo <= value <= hi:
                return -np.inf
    return float(val)


def mvn_box_prob(mean: np.ndarray, cov: np.ndarray, lo: np.ndarray,
                 hi: np.ndarray, n_nodes: int = 24) -> float:
    """P(lo <= X <= hi) for X ~ N(mean, cov), d <= 3.

    Sequential-conditioning transform integrated with tensor Gauss-Legendre
    nodes: deterministic, unlike the randomized lattice rules scipy uses, so
    rerunning an estimation is byte-reproducible.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.asarray(cov, dtype=float)
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    d = mean.shape[0]
    if d > 3:
        raise ValueError("implemented for dimension <= 3")
    L = np.linalg.cholesky(cov)
    a = lo - mean
    b = hi - mean
    eps = 1e-14
    d1 = ndtr(a[0] / L[0, 0])
    e1 = ndtr(b[0] / L[0, 0])
    f1 = e1 - d1
    if d == 1 or f1 <= 0.0:
        return max(float(f1), 0.0)
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    y1 = ndtri(np.clip(d1 + t * f1, eps, 1.0 - eps))
    d2 = ndtr((a[1] - L[1, 0] * y1) / L[1, 1])
    e2 = ndtr((b[1] - L[1, 0] * y1) / L[1, 1])
    f2 = np.clip(e2 - d2, 0.0, 1.0)
    if d == 2:
        return float(f1 * np.sum(w * f2))
    y2 = ndtri(np.clip(d2[:, None] + t[None, :] * f2[:, None], eps, 1.0 - eps))
    z = a[2] - L[2, 0] * y1[:, None] - L[2, 1] * y2
    zh = b[2] - L[2, 0] * y1[:, None] - L[2, 1] * y2
    f3 = np.clip(ndtr(zh / L[2, 2]) - ndtr(z / L[2, 2]), 0.0, 1.0)
    inner = f3 @ w
    return float(f1 * np.sum(w * f2 * inner))


def truncated_mvn_gibbs(mean: np.ndarray, cov: np.ndarray, lo: np.ndarray,
                        hi: np.ndarray, sweeps: int, rng: RandomStream,
                        start: np.ndarray | None = None) -> np.ndarray:
    """Coordinate-wise Gibbs for a box-truncated multivariate normal.

    Each coordinate is drawn from its exact univariate conditional truncated
    normal by inverse CDF; the state after ``sweeps`` full passes is returned.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.asarray(cov, dtype=float)
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    d = mean.shape[0]
    if np.any(lo >= hi):
        raise ValueError("empty box: need lo < hi")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance must be symmetric positive definite")
    coef = []
    cvar = []
    for i in range(d):
        idx = [j for j in range(d) if j != i]
        if idx:
            s = np.linalg.solve(cov[np.ix_(idx, idx)], cov[idx, i])
            coef.append((idx, s))
            cvar.append(float(cov[i, i] - cov[i, idx] @ s))
        else:
            coef.append(([], np.zeros(0)))
            cvar.append(float(cov[i, i]))
    x = np.clip(mean if start is None else np.asarray(start, dtype=float).ravel(), lo, hi)
    x = x.copy()
    for _ in range(sweeps):
        for i in range(d):
            idx, s = coef[i]
            cm = mean[i] + (s @ (x[idx] - mean[idx]) if idx else 0.0)
            x[i] = draw_trunc_normal(rng, float(cm), np.sqrt(cvar[i]),
                                     float(lo[i]), float(hi[i]))
    return x


def _trunc_mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray,
                      lo: np.ndarray, hi: np.ndarray) -> float:
    if np.any(x < lo) or np.any(x > hi):
        return -np.inf
    d = mean.shape[0]
    c, low = cho_factor(cov, lower=True)
    dev = x - mean
    quad = dev @ cho_solve((c, low), dev)
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    z = mvn_box_prob(mean, cov, lo, hi)
    if z <= 0.0:
        return -np.inf
    return float(-0.5 * (d * np.log(2 * np.pi) + logdet + quad) - np.log(z))


def _regime_sample_means(y: ObservationSeries, path: StatePath,
                         fallback: np.ndarray) -> np.ndarray:
    out = fallback.copy()
    for k in range(path.M):
        mask = path.regimes == k
        if mask.any():
            out[k] = y.y[mask].mean()
    return out


def _mu_proposal_params(chain: ChainState, k: int) -> tuple[float, float]:
    """Normal approximation of the mean's conditional: plug-in variance path."""
    theta = chain.params
    y = chain.y
    mu_star = _regime_sample_means(y, chain.path, theta.mu_vec)
    sigstar2 = np.empty(y.T)
    variance_path_kernel(y.y, chain.path.regimes, mu_star, theta.gamma_vec,
                         theta.alpha_vec, theta.beta_vec, chain.init.sigma1_sq,
                         sigstar2)
    mask = chain.path.regimes == k
    inv = 1.0 / sigstar2[mask]
    sk2 = 1.0 / inv.sum()
    mk = sk2 * float((y.y[mask] * inv).sum())
    return mk, sk2


def update_mu(chain: ChainState, k: int, y: ObservationSeries, prior: PriorSpec,
              rng: RandomStream, n_tries: int = 1) -> tuple[float, bool]:
    """Metropolis update of one regime mean with a truncated-normal proposal.

    The proposal moments come from the plug-in variance path, so the proposal
    is an independence one; the acceptance ratio uses the exact
    path-conditional posterior.  ``n_tries`` > 1 runs a multiple-try variant
    with the same proposal.  Never-visited regimes are redrawn from their
    uniform prior (the conditional equals the prior there).
    """
    theta = chain.params
    lo, hi = prior.support_mu[k]
    if not (chain.path.regimes == k).any():
        new = float(lo + rng.generator.random() * (hi - lo))
        chain.set_params(theta.replace_regime(
            k, RegimeParams(new, theta.regimes[k].gamma, theta.regimes[k].alpha,
                            theta.regimes[k].beta)))
        return new, True
    mk, sk2 = _mu_proposal_params(chain, k)
    sk = np.sqrt(sk2)
    cur = theta.regimes[k].mu
    log_cur = chain.log_target()

    def with_mu(v: float) -> ModelParams:
        r = theta.regimes[k]
        return theta.replace_regime(k, RegimeParams(v, r.gamma, r.alpha, r.beta))

    def log_target(v: float) -> float:
        from .model import path_conditional_logdensity
        return path_conditional_logdensity(y, chain.path, with_mu(v), chain.init)

    if n_tries == 1:
        prop = draw_trunc_normal(rng, mk, sk, lo, hi)
        log_ratio = (log_target(prop) - log_cur
                     + trunc_normal_logpdf(cur, mk, sk, lo, hi)
                     - trunc_normal_logpdf(prop, mk, sk, lo, hi))
        u = rng.generator.random()
        if np.log(u) <= log_ratio:
            chain.set_params(with_mu(prop))
            return float(prop), True
        return float(cur), False
    # multiple-try with independent truncated-normal trials
    trials = np.array([draw_trunc_normal(rng, mk, sk, lo, hi) for _ in range(n_tries)])
    log_w = np.array([log_target(v) - trunc_normal_logpdf(v, mk, sk, lo, hi)
                      for v in trials])
    mx = log_w.max()
    p = np.exp(log_w - mx)
    p /= p.sum()
    from .stochastics import categorical_from_uniform
    sel = categorical_from_uniform(p, rng.generator.random())
    ref = np.array([draw_trunc_normal(rng, mk, sk, lo, hi) for _ in range(n_tries - 1)])
    log_wr = np.array([log_target(v) - trunc_normal_logpdf(v, mk, sk, lo, hi)
                       for v in ref] +
                      [log_cur - trunc_normal_logpdf(cur, mk, sk, lo, hi)])
    num = mx + np.log(np.sum(np.exp(log_w - mx)))
    mxr = log_wr.max()
    den = mxr + np.log(np.sum(np.exp(log_wr - mxr)))
    u = rng.generator.random()
    if np.log(u) <= num - den:
        chain.set_params(with_mu(float(trials[sel])))
        return float(trials[sel]), True
    return float(cur), False


def _taylor_proposal(chain: ChainState, k: int, triple_lin: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray] | None:
    """Mean/covariance of the linearized volatility-triple proposal.

    Linearizes the ARMA residual of the squared errors around ``triple_lin``
    for regime k (other regimes at their current values); returns None when
    the information matrix is singular.
    """
    theta = chain.params
    y = chain.y
    T = y.T
    ga = theta.gamma_vec.copy()
    al = theta.alpha_vec.copy()
    be = theta.beta_vec.copy()
    ga[k], al[k], be[k] = triple_lin
    reg = chain.path.regimes
    wstar = np.empty(T)
    grads = np.empty((T, 3))
    garch_taylor_kernel(y.y, reg, theta.mu_vec, ga, al, be, k,
                        chain.init.sigma1_sq, wstar, grads)
    nabla = -grads
    r = wstar + nabla @ triple_lin
    sigstar2 = np.empty(T)
    variance_path_kernel(y.y, reg, theta.mu_vec, ga, al, be,
                         chain.init.sigma1_sq, sigstar2)
    vinv = 1.0 / (2.0 * sigstar2 ** 2)
    a = nabla.T @ (nabla * vinv[:, None])
    b = nabla.T @ (vinv * r)
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        return None
    a = 0.5 * (a + a.T)
    try:
        c, low = cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        return None
    cov = cho_solve((c, low), np.eye(3))
    cov = 0.5 * (cov + cov.T)
    if np.any(np.diag(cov) <= 0) or not np.all(np.isfinite(cov)):
        return None
    mean = cov @ b
    return mean, cov


def _fallback_scales(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return (hi - lo) / 6.0


def update_garch_block(chain: ChainState, k: int, y: ObservationSeries,
                       prior: PriorSpec, rng: RandomStream,
                       mvn_sweeps: int = 10) -> tuple[tuple[float, float, float], bool, bool]:
    """Metropolis update of one regime's (gamma, alpha, beta).

    Proposal: trivariate normal from the Taylor-linearized ARMA form,
    truncated to positivity intersected with the prior box and sampled by the
    truncated-MVN Gibbs routine; re-linearized around the proposed point for
    the reverse density.  Singular information matrices fall back to
    independent per-coordinate truncated normals around the current values
    (flagged in the third return element).  Acceptance targets the exact
    path-conditional posterior.
    """
    theta = chain.params
    r0 = theta.regimes[k]
    cur = np.array([r0.gamma, r0.alpha, r0.beta])
    lo = np.array([max(prior.support_gamma[k, 0], 1e-12),
                   prior.support_alpha[k, 0], prior.support_beta[k, 0]])
    hi = np.array([prior.support_gamma[k, 1], prior.support_alpha[k, 1],
                   prior.support_beta[k, 1]])
    if not (chain.path.regimes == k).any():
        new = lo + rng.generator.random(3) * (hi - lo)
        chain.set_params(theta.replace_regime(
            k, RegimeParams(r0.mu, float(new[0]), float(new[1]), float(new[2]))))
        return (float(new[0]), float(new[1]), float(new[2])), True, False

    def with_triple(v: np.ndarray) -> ModelParams:
        return theta.replace_regime(k, RegimeParams(r0.mu, float(v[0]),
                                                    float(v[1]), float(v[2])))

    from .model import path_conditional_logdensity

    log_cur = chain.log_target()
    fwd = _taylor_proposal(chain, k, cur)
    used_fallback = fwd is None
    scales = _fallback_scales(lo, hi)
    if fwd is None:
        prop = np.array([draw_trunc_normal(rng, cur[i], scales[i], lo[i], hi[i])
                         for i in range(3)])
        log_fwd = sum(trunc_normal_logpdf(prop[i], cur[i], scales[i], lo[i], hi[i])
                      for i in range(3))
    else:
        mean_f, cov_f = fwd
        prop = truncated_mvn_gibbs(mean_f, cov_f, lo, hi, mvn_sweeps, rng)
        log_fwd = _trunc_mvn_logpdf(prop, mean_f, cov_f, lo, hi)
    log_prop_target = path_conditional_logdensity(y, chain.path, with_triple(prop),
                                                  chain.init)
    rev = _taylor_proposal(chain, k, prop)
    if rev is None:
        log_rev = sum(trunc_normal_logpdf(cur[i], prop[i], scales[i], lo[i], hi[i])
                      for i in range(3))
    else:
        mean_r, cov_r = rev
        log_rev = _trunc_mvn_logpdf(cur, mean_r, cov_r, lo, hi)
    log_ratio = log_prop_target - log_cur + log_rev - log_fwd
    u = rng.generator.random()
    if np.log(u) <= log_ratio:
        chain.set_params(with_triple(prop))
        return (float(prop[0]), float(prop[1]), float(prop[2])), True, used_fallback
    return (float(cur[0]), float(cur[1]), float(cur[2])), False, used_fallback
