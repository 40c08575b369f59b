"""Rate, density and latency-distribution summaries."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError


def effective_rate(t_cont_us, grouping: int, payload_symbols: int):
    """Payload symbols per second delivered over the contention time.

    ``R = G * N_packet / t_cont``.
    """
    t = np.asarray(t_cont_us, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t_cont must be positive")
    out = grouping * payload_symbols / (t * 1e-6)
    return float(out) if out.ndim == 0 else out


def effective_bit_rate(t_cont_us, grouping: int, payload_symbols: int,
                       bits_per_symbol: int = 4, code_rate: float = 2 / 3):
    """:func:`effective_rate` in bit/s for a given modulation and code rate.

    The defaults (16-QAM, rate 2/3) give 1.536 Mbit/s for ``G=4`` and 18
    payload symbols over one 125 us frame.
    """
    return effective_rate(t_cont_us, grouping, payload_symbols) * bits_per_symbol * code_rate


def density(p: float, pool_size: int, radius_m: float, frame_us: float) -> float:
    """New activations per square metre per second over the half-disk cell."""
    if p < 0 or pool_size <= 0 or radius_m <= 0 or frame_us <= 0:
        raise DomainError("density parameters must be positive")
    area = 0.5 * math.pi * radius_m**2
    return pool_size * p / (area * frame_us * 1e-6)


def latency_ccdf(latencies_us, thresholds_us, censored: int = 0) -> np.ndarray:
    """``P(latency > t)`` with censored packets counted above every threshold."""
    lat = np.sort(np.asarray(latencies_us, dtype=float))
    thr = np.asarray(thresholds_us, dtype=float)
    total = lat.size + censored
    if total == 0:
        return np.zeros(thr.size)
    above = lat.size - np.searchsorted(lat, thr, side="right")
    return (above + censored) / total


def reliability(latencies_us, threshold_us: float, censored: int = 0) -> float:
    """Fraction of packets delivered within ``threshold_us``."""
    return float(1.0 - latency_ccdf(latencies_us, [threshold_us], censored)[0])


def latency_quantile(latencies_us, q: float, censored: int = 0) -> float:
    """Quantile of the latency; ``inf`` when it falls among censored packets."""
    lat = np.sort(np.asarray(latencies_us, dtype=float))
    total = lat.size + censored
    if total == 0:
        return math.nan
    rank = math.ceil(q * total) - 1
    rank = min(max(rank, 0), total - 1)
    return float(lat[rank]) if rank < lat.size else math.inf
