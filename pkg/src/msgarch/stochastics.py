"""Seedable random streams and the primitive draws used by every sampler.

All sampling in the package goes through a :class:`RandomStream` so that a run
is a pure function of ``(seed, stream_id)``.  Categorical and truncated-normal
draws use inverse-CDF transforms: couplings built on shared uniforms (the
antithetic backward sampler) need a monotone map from uniform to outcome, so
rejection sampling is never used on those paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri


@dataclass
class RandomStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Distinct ``stream_id`` values give statistically independent streams
    (numpy SeedSequence spawning), so concurrent chains never share state.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)


def draw_uniform(s: RandomStream, size=None):
    """Uniform draw(s) on [0, 1)."""
    return s.generator.random(size)


def draw_std_normal(s: RandomStream, size=None):
    return s.generator.standard_normal(size)


def draw_categorical(s: RandomStream, p: np.ndarray) -> int:
    """Inverse-CDF categorical draw with fixed cell order 0..M-1."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("p must be a nonempty 1D probability vector")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-8:
        raise ValueError("p must be normalized probabilities")
    return categorical_from_uniform(p, s.generator.random())


def categorical_from_uniform(p: np.ndarray, u: float) -> int:
    """Map a uniform into a category by fixed-order inverse CDF.

    ``u`` may equal 1.0 (antithetic complements close the interval); it then
    lands in the last nonzero cell.
    """
    cum = 0.0
    last = 0
    for m in range(len(p)):
        if p[m] > 0.0:
            last = m
        cum += p[m]
        if u < cum:
            return m
    return last


def draw_dirichlet(s: RandomStream, a: np.ndarray) -> np.ndarray:
    """Dirichlet draw via normalized independent gamma variates."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("Dirichlet parameters must be positive")
    g = s.generator.standard_gamma(a)
    tot = g.sum()
    if tot <= 0.0:
        # all-zero gammas can only occur for tiny alphas; fall back to argmax mass
        out = np.zeros_like(a)
        out[int(np.argmax(a))] = 1.0
        return out
    return g / tot


def draw_trunc_normal(s: RandomStream, m: float, sd: float, lo: float, hi: float) -> float:
    """Truncated-normal draw by inverse CDF on clipped quantiles."""
    return trunc_normal_from_uniform(s.generator.random(), m, sd, lo, hi)


def trunc_normal_from_uniform(u: float, m: float, sd: float, lo: float, hi: float) -> float:
    if not sd > 0:
        raise ValueError("sd must be positive")
    if not lo < hi:
        raise ValueError("need lo < hi")
    a = (lo - m) / sd
    b = (hi - m) / sd
    pa = ndtr(a)
    pb = ndtr(b)
    if pb - pa <= 0.0:
        # entire box is in a far tail; quantile arithmetic has no resolution left
        return min(max(m, lo), hi)
    x = m + sd * ndtri(pa + u * (pb - pa))
    return min(max(x, lo), hi)


def trunc_normal_logpdf(x: float, m: float, sd: float, lo: float, hi: float) -> float:
    """Log density of the [lo, hi]-truncated Normal(m, sd**2)."""
    if not sd > 0:
        raise ValueError("sd must be positive")
    if x < lo or x > hi:
        return -np.inf
    a = (lo - m) / sd
    b = (hi - m) / sd
    z = (x - m) / sd
    # log(Phi(b) - Phi(a)) without cancellation
    la, lb = log_ndtr(a), log_ndtr(b)
    lognorm = lb + np.log1p(-np.exp(min(la - lb, 0.0))) if la > -np.inf else lb
    return -0.5 * (np.log(2.0 * np.pi) + z * z) - np.log(sd) - lognorm
