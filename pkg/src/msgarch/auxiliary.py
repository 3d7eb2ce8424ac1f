"""Path-dependence-free approximations used to build the proposal density.

Five proxy recursions replace the lagged conditional variance with an
expectation over regimes so the filter never has to carry the full history:

* ``basic`` — averages the per-regime variances under the one-step-ahead
  regime law (conditioning on information through t-2),
* ``gray`` — same conditioning, but uses the total variance of the
  observable, so the dispersion of regime means enters,
* ``dueker`` — weights by the one-period-ahead smoothed law of the
  regime two steps back,
* ``klaassen-simple`` — weights by the filtered law of the previous regime,
* ``klaassen`` — additionally conditions on the current regime, giving one
  proxy pair per destination regime.

Each step returns per-regime observation means and variances; the proposal
observation density is the Normal with those moments.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from ._kernels import aux_step_core
from .model import ModelParams, TransitionMatrix, VarianceInit


class AuxKind(Enum):
    B = "basic"
    G = "gray"
    D = "dueker"
    SK = "klaassen-simple"
    K = "klaassen"

    @classmethod
    def parse(cls, name: str) -> "AuxKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown auxiliary model {name!r}; "
                         f"expected one of {[k.value for k in cls]}")

    @property
    def code(self) -> int:
        return {"basic": _kernels.KIND_BASIC,
                "gray": _kernels.KIND_GRAY,
                "dueker": _kernels.KIND_DUEKER,
                "klaassen-simple": _kernels.KIND_KLAASSEN_SIMPLE,
                "klaassen": _kernels.KIND_KLAASSEN}[self.value]


@dataclass
class AuxState:
    """Carry-over of one proxy step to the next.

    ``per_regime_var`` holds the per-regime conditional variances of the last
    step (the quantities averaged by the next step); ``prev_predictive`` and
    ``prevprev_filtered`` remember the filter rows the next step conditions
    on.  ``proxy_mu``/``proxy_var`` mirror the scalar proxies of the last
    step (arrays of length M for the current-regime-conditional model), and
    ``smoothed_probs`` the smoothing weights when the ``dueker`` recursion is
    active.
    """

    kind: AuxKind
    per_regime_var: np.ndarray
    prev_predictive: np.ndarray
    prevprev_filtered: np.ndarray
    proxy_mu: np.ndarray
    proxy_var: np.ndarray
    smoothed_probs: np.ndarray | None = None

    def validate(self) -> None:
        if np.any(self.per_regime_var <= 0) or np.any(np.asarray(self.proxy_var) <= 0):
            raise ValueError("auxiliary variances must stay positive")
        for probs in (self.prev_predictive, self.prevprev_filtered):
            if abs(probs.sum() - 1.0) > 1e-10:
                raise ValueError("probability sequences must stay normalized")


def aux_init(kind: AuxKind, theta: ModelParams, init: VarianceInit,
             pi0: np.ndarray) -> AuxState:
    """Seed the proxy recursion at t = 1."""
    pi0 = np.asarray(pi0, dtype=float)
    if abs(pi0.sum() - 1.0) > 1e-10:
        raise ValueError("pi0 must sum to 1")
    M = theta.M
    mu_bar = float(pi0 @ theta.mu_vec)
    return AuxState(
        kind=kind,
        per_regime_var=np.full(M, init.sigma1_sq),
        prev_predictive=pi0.copy(),
        prevprev_filtered=pi0.copy(),
        proxy_mu=np.full(M if kind is AuxKind.K else 1, mu_bar),
        proxy_var=np.full(M if kind is AuxKind.K else 1, init.sigma1_sq),
    )


def aux_step(kind: AuxKind, state: AuxState, theta: ModelParams, y_prev: float,
             filtered_prev: np.ndarray, predictive_curr: np.ndarray,
             trans: TransitionMatrix) -> tuple[np.ndarray, np.ndarray, AuxState]:
    """Advance the proxy recursion one step.

    Returns per-regime observation means and variances for the current time
    plus the updated state.  The log proposal density for regime m is then
    ``Normal(mean[m], var[m]).logpdf(y_t)``.
    """
    M = theta.M
    filtered_prev = np.asarray(filtered_prev, dtype=float)
    predictive_curr = np.asarray(predictive_curr, dtype=float)
    out_var = np.empty(M)
    out_smoothed = np.zeros(M)
    aux_step_core(kind.code, state.per_regime_var, state.prev_predictive,
                  state.prevprev_filtered, theta.mu_vec, theta.gamma_vec,
                  theta.alpha_vec, theta.beta_vec, trans.p, y_prev,
                  filtered_prev, predictive_curr, out_var, out_smoothed)
    if np.any(out_var <= 0):
        raise FloatingPointError("auxiliary step produced a nonpositive variance")
    means = theta.mu_vec.copy()
    # recompute the scalar proxies for inspection (the kernel only needs out_var)
    if kind is AuxKind.K:
        proxy_mu = np.empty(M)
        proxy_var = np.empty(M)
        for i in range(M):
            w = prob_prev_given_curr(filtered_prev, predictive_curr, trans, i) \
                if predictive_curr[i] > 0 else filtered_prev
            proxy_mu[i] = w @ theta.mu_vec
            proxy_var[i] = w @ (theta.mu_vec ** 2 + state.per_regime_var) - proxy_mu[i] ** 2
    else:
        if kind in (AuxKind.B, AuxKind.G):
            w = state.prev_predictive
        elif kind is AuxKind.SK:
            w = filtered_prev
        else:
            w = out_smoothed
        mu_bar = float(w @ theta.mu_vec)
        proxy_mu = np.array([mu_bar])
        if kind is AuxKind.G:
            proxy_var = np.array([w @ (theta.mu_vec ** 2 + state.per_regime_var) - mu_bar ** 2])
        else:
            proxy_var = np.array([w @ state.per_regime_var])
    new_state = AuxState(
        kind=kind,
        per_regime_var=out_var,
        prev_predictive=predictive_curr.copy(),
        prevprev_filtered=filtered_prev.copy(),
        proxy_mu=proxy_mu,
        proxy_var=proxy_var,
        smoothed_probs=out_smoothed if kind is AuxKind.D else None,
    )
    return means, out_var, new_state


def one_step_smoothed(filtered_prev: np.ndarray, filtered_curr: np.ndarray,
                      predictive_curr: np.ndarray, trans: TransitionMatrix) -> np.ndarray:
    """q(state at t-1 | data through t) from one extra observation."""
    filtered_prev = np.asarray(filtered_prev, dtype=float)
    filtered_curr = np.asarray(filtered_curr, dtype=float)
    predictive_curr = np.asarray(predictive_curr, dtype=float)
    if np.any(predictive_curr <= 0):
        raise ValueError("predictive probabilities must be positive for smoothing")
    ratio = filtered_curr / predictive_curr
    out = filtered_prev * (trans.p.T @ ratio)
    s = out.sum()
    if s <= 0:
        raise ValueError("smoothing produced zero mass")
    return out / s


def prob_prev_given_curr(filtered_prev: np.ndarray, predictive_curr: np.ndarray,
                         trans: TransitionMatrix, i: int) -> np.ndarray:
    """Bayes inversion q(state at t-1 | data through t-1, state i at t)."""
    filtered_prev = np.asarray(filtered_prev, dtype=float)
    predictive_curr = np.asarray(predictive_curr, dtype=float)
    if predictive_curr[i] <= 0:
        raise ValueError(f"predictive probability of regime {i} is zero")
    out = trans.p[i, :] * filtered_prev / predictive_curr[i]
    return out
