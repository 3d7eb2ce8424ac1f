"""Chain and estimate diagnostics: moments, ACF, inefficiency, MSE, KDE."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import StatePath


@dataclass
class ChainTrace:
    """Kept draws of one chain: R sweeps x P monitored scalars."""

    draws: np.ndarray
    columns: tuple[str, ...]
    accept_counts: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.columns.index(name)]


def summary_stats(x: np.ndarray) -> dict:
    """Min/max/mean/sd plus standardized third and fourth moments.

    Kurtosis is the raw fourth standardized moment (normal = 3); the excess
    value is reported alongside.  sd uses the n-1 denominator.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two observations")
    m = x.mean()
    dev = x - m
    m2 = np.mean(dev ** 2)
    if m2 <= 0:
        raise ValueError("zero variance: higher moments undefined")
    m3 = np.mean(dev ** 3)
    m4 = np.mean(dev ** 4)
    kurt = m4 / m2 ** 2
    return {
        "min": float(x.min()),
        "max": float(x.max()),
        "mean": float(m),
        "sd": float(np.sqrt(x.var(ddof=1))),
        "skewness": float(m3 / m2 ** 1.5),
        "kurtosis": float(kurt),
        "excess_kurtosis": float(kurt - 3.0),
    }


def acf(x: np.ndarray, L: int) -> np.ndarray:
    """Autocorrelations at lags 1..L (biased 1/n autocovariance convention)."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if L >= n:
        raise ValueError("max lag must be below the series length")
    dev = x - x.mean()
    var = np.mean(dev ** 2)
    if var <= 0:
        raise ValueError("zero variance")
    # FFT autocovariance
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(dev, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: L + 1] / n
    return acov[1: L + 1] / var


def _parzen_weights(L: int) -> np.ndarray:
    z = np.arange(1, L + 1) / (L + 1.0)
    w = np.where(z <= 0.5, 1.0 - 6.0 * z ** 2 + 6.0 * z ** 3, 2.0 * (1.0 - z) ** 3)
    return w


def inefficiency_factor(x: np.ndarray, L: int = 500, window: str = "parzen") -> float:
    """IF = 1 + 2 sum_l w_l rho_l; > 1 means autocorrelation-inflated variance."""
    x = np.asarray(x, dtype=float).ravel()
    if L >= x.size:
        raise ValueError("L must be below the chain length")
    rho = acf(x, L)
    if window == "parzen":
        w = _parzen_weights(L)
    elif window == "flat":
        w = np.ones(L)
    else:
        raise ValueError(f"unknown taper {window!r}")
    return float(1.0 + 2.0 * np.sum(w * rho))


def relative_inefficiency(if_a: float, time_a: float, if_b: float, time_b: float) -> float:
    """Factor by which A's runtime must grow to match B's precision."""
    for v in (if_a, time_a, if_b, time_b):
        if not v > 0:
            raise ValueError("inputs must be positive")
    return (time_a / time_b) * (if_a / if_b)


def mse(theta_hat: np.ndarray, theta_true: np.ndarray) -> float:
    a = np.asarray(theta_hat, dtype=float).ravel()
    b = np.asarray(theta_true, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    return float(np.mean((a - b) ** 2))


def classify_regimes(mean_states: np.ndarray, true_path: StatePath) -> float:
    """Fraction of correctly labeled time points under the mean-state > 1/2 rule.

    ``mean_states`` are per-t averages of the sampled regime-2 indicator;
    ties go to regime 1.  Binary-regime rule only.
    """
    if true_path.M != 2:
        raise ValueError("classification rule is defined for M = 2")
    ms = np.asarray(mean_states, dtype=float).ravel()
    if ms.shape[0] != true_path.T:
        raise ValueError("length mismatch")
    if np.any(ms < 0) or np.any(ms > 1):
        raise ValueError("mean states must lie in [0, 1]")
    predicted = (ms > 0.5).astype(np.int64)  # 0-based: regime 2 == index 1
    return float(np.mean(predicted == true_path.regimes))


def kde(samples: np.ndarray, grid_size: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density on a regular grid, Silverman bandwidth."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    sd = x.std(ddof=1)
    if sd <= 0:
        raise ValueError("zero variance")
    h = 1.06 * sd * n ** (-0.2)
    grid = np.linspace(x.min() - 4 * h, x.max() + 4 * h, grid_size)
    dens = np.zeros(grid_size)
    # chunked to bound the broadcast footprint
    step = max(1, 2 ** 22 // grid_size)
    c = 1.0 / (n * h * np.sqrt(2 * np.pi))
    for i in range(0, n, step):
        z = (grid[None, :] - x[i: i + step, None]) / h
        dens += c * np.exp(-0.5 * z * z).sum(axis=0)
    return grid, dens
