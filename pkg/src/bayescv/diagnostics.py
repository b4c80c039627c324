"""Convergence diagnostics for scalar MCMC parameters.

Split R-hat (each chain halved before the between/within comparison) and
a combined-chain effective sample size built from FFT autocorrelations
with Geyer's initial-positive-sequence truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ParameterDiagnostics", "split_r_hat", "effective_sample_size", "diagnose"]


@dataclass(frozen=True)
class ParameterDiagnostics:
    r_hat: float
    ess: float


def _split_halves(chains: np.ndarray) -> np.ndarray:
    """(n_chains, n_draws) -> (2 * n_chains, n_draws // 2), dropping an odd draw."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2:
        raise ValueError(f"expected (n_chains, n_draws), got shape {chains.shape}")
    n = (chains.shape[1] // 2) * 2
    if n < 4:
        raise ValueError("need at least 4 draws per chain")
    half = n // 2
    return np.vstack([chains[:, :half], chains[:, half:n]])


def split_r_hat(chains: np.ndarray) -> float:
    """Potential scale reduction over split chains.

    Values near 1 indicate the chains agree; NaN is returned when the
    draws are constant, where the statistic is undefined.
    """
    split = _split_halves(chains)
    m, n = split.shape
    chain_means = split.mean(axis=1)
    chain_vars = split.var(axis=1, ddof=1)
    within = chain_vars.mean()
    between = n * chain_means.var(ddof=1)
    if within == 0.0:
        return math.nan
    var_hat = (n - 1) / n * within + between / n
    return math.sqrt(var_hat / within)


def _autocovariance(row: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one chain for all lags, via FFT."""
    n = row.shape[0]
    centered = row - row.mean()
    size = 2 ** math.ceil(math.log2(2 * n))
    freq = np.fft.rfft(centered, n=size)
    acov = np.fft.irfft(freq * np.conj(freq), n=size)[:n].real
    return acov / n


def effective_sample_size(chains: np.ndarray) -> float:
    """Effective sample size of the pooled split chains.

    Per-chain autocovariances are combined into a multi-chain
    autocorrelation; lag sums use Geyer's initial positive sequence made
    monotone, and the result is capped at the actual draw count. Constant
    chains give NaN.
    """
    split = _split_halves(chains)
    m, n = split.shape
    acov = np.vstack([_autocovariance(row) for row in split])
    chain_vars = acov[:, 0] * n / (n - 1)
    within = chain_vars.mean()
    between = n * split.mean(axis=1).var(ddof=1) if m > 1 else 0.0
    var_hat = (n - 1) / n * within + between / n
    if var_hat == 0.0 or not math.isfinite(var_hat):
        return math.nan
    rho = 1.0 - (within - acov.mean(axis=0)) / var_hat
    rho[0] = 1.0
    # Sum autocorrelations in (even, odd) pairs while the pair sums stay
    # positive, forcing the sequence to be non-increasing as we go.
    tau = 0.0
    prev_pair = math.inf
    total_pairs = n // 2
    for t in range(total_pairs):
        pair = rho[2 * t] + (rho[2 * t + 1] if 2 * t + 1 < n else 0.0)
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
    tau = max(2.0 * tau - 1.0, 1.0 / math.log10(m * n + 10.0))
    return min(m * n / tau, float(m * n))


def diagnose(chains: np.ndarray) -> ParameterDiagnostics:
    return ParameterDiagnostics(r_hat=split_r_hat(chains), ess=effective_sample_size(chains))
