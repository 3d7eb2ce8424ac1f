"""Forward filtering, backward sampling and antithetic trajectory coupling.

One forward pass under an auxiliary model yields filtered/predictive regime
probabilities; whole state trajectories are then drawn backward by inverse
CDF, so a single filter run feeds any number of proposal draws.  The
antithetic variant drives K trajectories with permuted-displacement uniforms,
which are pairwise negatively associated for K <= 3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._kernels import (backward_sample_kernel, forward_filter_kernel,
                       proposal_logdensity_kernel)
from .auxiliary import AuxKind
from .model import ModelParams, ObservationSeries, StatePath, TransitionMatrix, VarianceInit
from .stochastics import RandomStream

_PERMS = {2: tuple(itertools.permutations(range(2))),
          3: tuple(itertools.permutations(range(3)))}


@dataclass(frozen=True)
class FilterOutput:
    """One forward pass: regime probabilities plus the proposal's variance trace.

    ``aux_vars[t, m]`` is the proposal observation variance for regime m at t
    (the mean is the regime mean), so the proposal density is fully
    reconstructable from this object.  Immutable; any number of backward
    samples may be drawn from one instance.
    """

    filtered: np.ndarray
    predictive: np.ndarray
    aux_means: np.ndarray
    aux_vars: np.ndarray
    log_marginal: float
    pi0: np.ndarray

    @property
    def T(self) -> int:
        return self.filtered.shape[0]

    @property
    def M(self) -> int:
        return self.filtered.shape[1]


@dataclass(frozen=True)
class UniformBlock:
    """T x K uniforms driving K coupled backward samples."""

    u: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 2:
            raise ValueError("uniform block must be T x K")
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise ValueError("uniforms must lie in [0, 1]")
        object.__setattr__(self, "u", u)


def forward_filter(y: ObservationSeries, theta: ModelParams, kind: AuxKind,
                   init: VarianceInit, pi0: np.ndarray | None = None) -> FilterOutput:
    """Run the approximate filter; ``pi0`` overrides the stationary start."""
    p0 = theta.pi0 if pi0 is None else np.asarray(pi0, dtype=float)
    if abs(p0.sum() - 1.0) > 1e-10:
        raise ValueError("initial distribution must sum to 1")
    T, M = y.T, theta.M
    filtered = np.empty((T, M))
    predictive = np.empty((T, M))
    aux_vars = np.empty((T, M))
    log_marginal = forward_filter_kernel(
        y.y, theta.mu_vec, theta.gamma_vec, theta.alpha_vec, theta.beta_vec,
        theta.trans.p, p0, init.sigma1_sq, kind.code, filtered, predictive, aux_vars)
    if not np.isfinite(log_marginal):
        raise FloatingPointError("forward filter log marginal is not finite")
    aux_means = np.tile(theta.mu_vec, (T, 1))
    return FilterOutput(filtered=filtered, predictive=predictive,
                        aux_means=aux_means, aux_vars=aux_vars,
                        log_marginal=float(log_marginal), pi0=p0)


def backward_sample(fo: FilterOutput, trans: TransitionMatrix,
                    u: np.ndarray) -> tuple[StatePath, float]:
    """Draw one trajectory backward through the filter; returns its log law.

    The categorical at each step uses fixed regime order, so coupled uniforms
    induce a monotone map from uniform to state.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != fo.T:
        raise ValueError("need one uniform per time step")
    reg = np.empty(fo.T, dtype=np.int64)
    logq = backward_sample_kernel(fo.filtered, fo.predictive, trans.p, u, reg)
    return StatePath(reg, fo.M), float(logq)


def proposal_logdensity(path: StatePath, fo: FilterOutput,
                        trans: TransitionMatrix) -> float:
    """Exact log proposal density of a trajectory under the filter output."""
    if path.T != fo.T or path.M != fo.M:
        raise ValueError("path dimensions do not match filter output")
    return float(proposal_logdensity_kernel(path.regimes, fo.filtered,
                                            fo.predictive, trans.p))


def permuted_displacement(K: int, r1: float, perm: tuple[int, ...]) -> np.ndarray:
    """K coupled uniforms from one seed uniform, fractional-part displacement.

    r_k = frac(2**(k-2) r_1 + 1/2) for the middle indices and
    r_K = 1 - frac(2**(K-2) r_1); the output is permuted by ``perm``
    (0-based).  Pairwise negative association is only established for K <= 3.
    """
    if K not in (2, 3):
        raise ValueError("K must be 2 or 3; negative association is unproven beyond")
    if not 0.0 <= r1 < 1.0:
        raise ValueError("r1 must lie in [0, 1)")
    if sorted(perm) != list(range(K)):
        raise ValueError("perm must be a permutation of 0..K-1")
    r = np.empty(K)
    r[0] = r1
    for k in range(2, K):
        r[k - 1] = (2.0 ** (k - 2) * r1 + 0.5) % 1.0
    r[K - 1] = 1.0 - (2.0 ** (K - 2) * r1) % 1.0
    return r[list(perm)]


def antithetic_uniform_block(K: int, T: int, rng: RandomStream) -> UniformBlock:
    """T x K uniforms, one fresh (seed, permutation) pair per time index."""
    if K not in (2, 3):
        raise ValueError("K must be 2 or 3")
    r1 = rng.generator.random(T)
    perms = _PERMS[K]
    pidx = rng.generator.integers(0, len(perms), size=T)
    u = np.empty((T, K))
    for t in range(T):
        u[t] = permuted_displacement(K, r1[t], perms[pidx[t]])
    return UniformBlock(u)


def backward_antithetic_sample(fo: FilterOutput, trans: TransitionMatrix, K: int,
                               rng: RandomStream) -> list[tuple[StatePath, float]]:
    """K negatively coupled backward samples sharing one filter output.

    For K = 2 this is the complementary-uniform construction: path 2 is
    driven by 1 - U_t at every step.
    """
    block = antithetic_uniform_block(K, fo.T, rng)
    return [backward_sample(fo, trans, block.u[:, k]) for k in range(K)]
