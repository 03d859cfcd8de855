"""Error analysis for correlated Monte Carlo series.

Series are arrays of shape ``(n_chains, n_samples)``; a 1-d array is treated
as a single chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples

WINDOW_FACTOR = 6.0
MIN_SAMPLES = 100


@dataclass(frozen=True)
class Estimate:
    mean: complex | float
    stderr: float
    tau_int: float
    n_samples: int

    @property
    def real(self) -> "Estimate":
        return Estimate(float(np.real(self.mean)), self.stderr, self.tau_int, self.n_samples)

    def consistent_with(self, value, n_sigma=3.0) -> bool:
        return abs(self.mean - value) <= n_sigma * self.stderr

    def to_dict(self) -> dict:
        m = self.mean
        out = {"re": float(np.real(m)), "im": float(np.imag(m))} if isinstance(m, complex) else {"mean": float(m)}
        out.update(stderr=float(self.stderr), tau_int=float(self.tau_int), n_samples=int(self.n_samples))
        return out


def _as_chains(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("series must have shape (n_chains, n_samples)")
    return x


def autocovariance(x) -> np.ndarray:
    """Pooled autocovariance Gamma(t) for t = 0..n-1 (real part for complex data)."""
    x = _as_chains(x)
    n_chains, n = x.shape
    dev = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.fft(dev, n=size, axis=1)
    acf = np.fft.ifft(f * np.conj(f), axis=1)[:, :n].real
    return acf.sum(axis=0) / (n_chains * (n - np.arange(n)))


def integrated_autocorrelation_time(x, c: float = WINDOW_FACTOR) -> tuple[float, int]:
    """Self-consistent windowed tau_int: smallest W with W >= c * tau(W).

    Returns ``(tau_int, W)``; tau_int is clipped below at 1/2.
    """
    gamma = autocovariance(x)
    if gamma[0] <= 0.0:
        return 0.5, 0
    rho = gamma / gamma[0]
    taus = 0.5 + np.cumsum(rho[1:])
    ws = np.arange(1, len(rho))
    ok = np.nonzero(ws >= c * taus)[0]
    w = int(ws[ok[0]]) if ok.size else int(ws[-1]) if ws.size else 0
    tau = float(taus[w - 1]) if w > 0 else 0.5
    return max(tau, 0.5), w


def estimate_series(x, min_samples: int = MIN_SAMPLES) -> Estimate:
    """Pooled mean with autocorrelation-corrected standard error."""
    x = _as_chains(x)
    n_total = x.size
    if n_total < min_samples:
        raise InsufficientSamples(f"{n_total} measurements, need at least {min_samples}")
    mean = x.mean()
    gamma0 = float(np.mean(np.abs(x - mean) ** 2))
    if gamma0 <= 0.0:
        tau = 0.5
    else:
        if np.iscomplexobj(x):
            tau = max(integrated_autocorrelation_time(x.real)[0], integrated_autocorrelation_time(x.imag)[0])
        else:
            tau = integrated_autocorrelation_time(x)[0]
    stderr = math.sqrt(gamma0 * 2.0 * tau / n_total)
    mean = complex(mean) if np.iscomplexobj(x) else float(mean)
    return Estimate(mean, stderr, tau, n_total)


def bin_means(x, n_bins: int) -> np.ndarray:
    """Equal-size bins that never straddle chains; ceil(n_bins / n_chains) per chain."""
    x = _as_chains(x)
    n_chains, n = x.shape
    per_chain = -(-n_bins // n_chains)
    size = n // per_chain
    if size < 1:
        raise InsufficientSamples(f"{n} samples per chain cannot fill {per_chain} bins")
    x = x[:, : size * per_chain].reshape(n_chains, per_chain, size)
    return x.mean(axis=2).reshape(-1)


def jackknife(func, *series, n_bins: int = 50):
    """Delete-one-bin jackknife of ``func(*means)``.

    Returns ``(value on the full sample, jackknife standard error)``.
    """
    binned = [bin_means(s, n_bins) for s in series]
    b = binned[0].size
    full = func(*(m.mean() for m in binned))
    totals = [m.sum() for m in binned]
    reps = np.array([func(*((t - m[i]) / (b - 1) for t, m in zip(totals, binned))) for i in range(b)])
    dev = reps - reps.mean()
    err = math.sqrt((b - 1) / b * float(np.sum(np.abs(dev) ** 2)))
    return full, err


def jackknife_covariance(f, g, n_bins: int = 50, f_for_product=None, g_for_product=None):
    """Cov(f, g) = E[fg] - E[f]E[g] with jackknife error.

    The product series defaults to ``f * g``; callers using conditional-mean
    (improved) observables pass the product explicitly.
    """
    f = _as_chains(f)
    g = _as_chains(g)
    fg = f * g if f_for_product is None else _as_chains(f_for_product) * _as_chains(g_for_product)
    return jackknife(lambda a, b, ab: ab - a * b, f, g, fg, n_bins=n_bins)
