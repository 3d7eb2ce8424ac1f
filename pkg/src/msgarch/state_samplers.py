"""Hidden-state updates: single-move Gibbs and the three multipoint samplers.

The multipoint samplers draw whole trajectories from one shared filter output
and correct the approximation through importance weights
w = target density / proposal density, whose unknown normalizer cancels in
every ratio.  All weight arithmetic stays in log space until the final
comparison with log(u).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import antithetic_reference_kernel, single_move_kernel
from .chain import ChainState
from .ffbs import FilterOutput, backward_antithetic_sample, backward_sample, proposal_logdensity
from .model import ModelParams, ObservationSeries, StatePath, VarianceInit, \
    path_conditional_logdensity
from .stochastics import RandomStream, categorical_from_uniform


@dataclass(frozen=True)
class TrialSet:
    """Proposal trials with target/proposal/importance logs."""

    paths: tuple[StatePath, ...]
    log_p: np.ndarray
    log_q: np.ndarray
    log_w: np.ndarray


@dataclass(frozen=True)
class StateUpdateReport:
    """Outcome of one multipoint state update; selected_index is 1-based."""

    accepted: bool
    selected_index: int
    log_accept_ratio: float


def _log_weight(log_p: float, log_q: float) -> float:
    # impossible-under-target paths get weight 0 regardless of the proposal
    return -np.inf if log_p == -np.inf else log_p - log_q


def _logsumexp(v: np.ndarray) -> float:
    mx = np.max(v)
    if mx == -np.inf:
        return -np.inf
    return float(mx + np.log(np.sum(np.exp(v - mx))))


def _select(log_w: np.ndarray, u: float) -> int:
    """Inverse-CDF selection on normalized exp(log_w - max), fixed order."""
    mx = np.max(log_w)
    p = np.exp(log_w - mx)
    p /= p.sum()
    return categorical_from_uniform(p, u)


def importance_log_weight(path: StatePath, theta: ModelParams, y: ObservationSeries,
                          fo: FilterOutput, init: VarianceInit) -> float:
    """log target minus log proposal for one trajectory."""
    log_p = path_conditional_logdensity(y, path, theta, init)
    log_q = proposal_logdensity(path, fo, theta.trans)
    return _log_weight(log_p, log_q)


def single_move_sweep(chain: ChainState, y: ObservationSeries,
                      rng: RandomStream) -> StatePath:
    """Exact one-at-a-time Gibbs over all T states (in chain, and returned).

    Each conditional recomputes the trailing likelihood product through the
    variance recursion, so a sweep costs O(M T^2).
    """
    theta = chain.params
    reg = chain.path.regimes.copy()
    sig2 = np.empty(y.T)
    us = rng.generator.random(y.T)
    single_move_kernel(y.y, reg, theta.mu_vec, theta.gamma_vec, theta.alpha_vec,
                       theta.beta_vec, theta.log_trans, theta.log_pi0,
                       chain.init.sigma1_sq, us, sig2)
    chain.path = StatePath(reg, theta.M)
    chain.sigma2 = sig2
    return chain.path


def _draw_trials(chain: ChainState, fo: FilterOutput, K: int,
                 rng: RandomStream, antithetic: bool) -> TrialSet:
    theta = chain.params
    if antithetic:
        drawn = backward_antithetic_sample(fo, theta.trans, K, rng)
    else:
        u = rng.generator.random((fo.T, K))
        drawn = [backward_sample(fo, theta.trans, u[:, k]) for k in range(K)]
    paths = tuple(p for p, _ in drawn)
    log_q = np.array([lq for _, lq in drawn])
    log_p = np.array([path_conditional_logdensity(chain.y, p, theta, chain.init)
                      for p in paths])
    log_w = np.array([_log_weight(lp, lq) for lp, lq in zip(log_p, log_q)])
    return TrialSet(paths=paths, log_p=log_p, log_q=log_q, log_w=log_w)


def _current_log_weight(chain: ChainState, fo: FilterOutput) -> float:
    return importance_log_weight(chain.path, chain.params, chain.y, fo, chain.init)


def _finish(chain: ChainState, candidate: StatePath, log_ratio: float, sel: int,
            rng: RandomStream) -> tuple[StatePath, StateUpdateReport]:
    u = rng.generator.random()
    accepted = np.log(u) <= log_ratio
    if accepted:
        chain.set_path(candidate)
    return chain.path, StateUpdateReport(accepted=bool(accepted),
                                         selected_index=sel + 1,
                                         log_accept_ratio=float(log_ratio))


def _reject_degenerate(chain: ChainState, rng: RandomStream,
                       consume: bool = True) -> tuple[StatePath, StateUpdateReport]:
    # every trial had weight zero: automatic rejection, still burn the accept draw
    if consume:
        rng.generator.random()
    return chain.path, StateUpdateReport(accepted=False, selected_index=1,
                                         log_accept_ratio=-np.inf)


def mtm_update(chain: ChainState, fo: FilterOutput, K: int,
               rng: RandomStream) -> tuple[StatePath, StateUpdateReport]:
    """Multiple-try Metropolis with a fresh reference set (K=1 is plain MH)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    theta = chain.params
    trials = _draw_trials(chain, fo, K, rng, antithetic=False)
    if np.all(trials.log_w == -np.inf):
        return _reject_degenerate(chain, rng)
    sel = _select(trials.log_w, rng.generator.random()) if K > 1 else 0
    candidate = trials.paths[sel]
    ref_w = np.empty(K)
    if K > 1:
        u = rng.generator.random((fo.T, K - 1))
        for k in range(K - 1):
            path, lq = backward_sample(fo, theta.trans, u[:, k])
            lp = path_conditional_logdensity(chain.y, path, theta, chain.init)
            ref_w[k] = _log_weight(lp, lq)
    ref_w[K - 1] = _current_log_weight(chain, fo)
    log_ratio = _logsumexp(trials.log_w) - _logsumexp(ref_w)
    return _finish(chain, candidate, log_ratio, sel, rng)


def mtmis_update(chain: ChainState, fo: FilterOutput, K: int,
                 rng: RandomStream) -> tuple[StatePath, StateUpdateReport]:
    """Multiple-trial metropolized independent sampler: no reference set."""
    if K < 1:
        raise ValueError("K must be >= 1")
    trials = _draw_trials(chain, fo, K, rng, antithetic=False)
    big_w = _logsumexp(trials.log_w)
    if big_w == -np.inf:
        return _reject_degenerate(chain, rng)
    sel = _select(trials.log_w, rng.generator.random()) if K > 1 else 0
    candidate = trials.paths[sel]
    w_sel = trials.log_w[sel]
    w_cur = _current_log_weight(chain, fo)
    # log(W - w_sel): -inf when the selected trial carries all the mass (K=1)
    if w_sel == big_w:
        log_rest = -np.inf
    else:
        log_rest = big_w + np.log1p(-np.exp(w_sel - big_w))
    log_den = np.logaddexp(log_rest, w_cur)
    log_ratio = big_w - log_den
    return _finish(chain, candidate, log_ratio, sel, rng)


def _antithetic_reference(chain: ChainState, fo: FilterOutput, K: int, n_fresh: int,
                          rng: RandomStream) -> list[tuple[StatePath, float]]:
    """Fresh reference draws, antithetically coupled to the current path.

    The current trajectory's driving uniforms are re-drawn from their
    inverse-CDF cells and the permuted-displacement relations are inverted,
    so the reference group mirrors the trial coupling with the retained path
    in the selected slot.  This is what keeps the correlated-try update
    exactly invariant (checked by the enumeration tests).
    """
    theta = chain.params
    T = fo.T
    u_raw = rng.generator.random(T)
    if K == 3:
        slot = rng.generator.integers(0, 3, size=T)
        branch = rng.generator.random(T)
        assign = rng.generator.random(T)
    else:
        slot = np.zeros(T, dtype=np.int64)
        branch = np.zeros(T)
        assign = np.zeros(T)
    out_reg = np.empty((n_fresh, T), dtype=np.int64)
    out_logq = np.empty(n_fresh)
    antithetic_reference_kernel(fo.filtered, fo.predictive, theta.trans.p,
                                chain.path.regimes, K, n_fresh, u_raw, slot,
                                branch, assign, out_reg, out_logq)
    return [(StatePath(out_reg[f], fo.M), float(out_logq[f])) for f in range(n_fresh)]


def mctm_update(chain: ChainState, fo: FilterOutput, K: int,
                rng: RandomStream) -> tuple[StatePath, StateUpdateReport]:
    """Correlated-try Metropolis on antithetically coupled trajectories.

    Weights are cumulative importance products through each trial; the
    reference set copies trial l-1 below the selected slot l, holds the
    current path at l, and continues the antithetic group above it.
    """
    if K not in (2, 3):
        raise ValueError("K must be 2 or 3 for the correlated-try sampler")
    theta = chain.params
    trials = _draw_trials(chain, fo, K, rng, antithetic=True)
    cum_w = np.cumsum(trials.log_w)
    if np.all(cum_w == -np.inf):
        return _reject_degenerate(chain, rng)
    sel = _select(cum_w, rng.generator.random())
    candidate = trials.paths[sel]
    ref_w = np.empty(K)
    for j in range(sel):
        ref_w[j] = trials.log_w[sel - 1]
    ref_w[sel] = _current_log_weight(chain, fo)
    n_fresh = K - 1 - sel
    if n_fresh > 0:
        fresh = _antithetic_reference(chain, fo, K, n_fresh, rng)
        for f, (path, lq) in enumerate(fresh):
            lp = path_conditional_logdensity(chain.y, path, theta, chain.init)
            ref_w[sel + 1 + f] = _log_weight(lp, lq)
    cum_ref = np.cumsum(ref_w)
    log_ratio = _logsumexp(cum_w) - _logsumexp(cum_ref)
    return _finish(chain, candidate, log_ratio, sel, rng)


SAMPLER_KINDS = ("single-move", "mtm", "mtmis", "mctm")
