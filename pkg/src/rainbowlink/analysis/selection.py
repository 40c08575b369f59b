"""Anchor mis-selection under exponential power-measurement noise.

A user scans ``2K+1`` candidate subcarriers around its anchor and keeps the
one with the largest measured power ``G_i + e_i``, where the ``e_i`` are
i.i.d. exponential with mean ``2 sigma^2`` (the power of a complex Gaussian
with variance ``sigma^2`` per dimension).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..beam import ArrayConfig, fejer_kernel
from ..errors import CapabilityError, DomainError
from ..parallel import map_shards
from ..seeding import child_rng, shard_sizes

MAX_COMPETITORS = 20
MC_SHARD = 100_000


def _check_sigma2(sigma2: float) -> None:
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")


def pairwise_mischoice_prob(delta, sigma2: float):
    """Probability that a candidate ``delta`` weaker than the best one wins.

    Parameters
    ----------
    delta : float or array_like
        Noiseless gain of the better candidate minus that of the worse one.
        Negative values are handled by symmetry.
    sigma2 : float
        Per-dimension noise variance; the noise power has mean ``2 sigma2``.
    """
    _check_sigma2(sigma2)
    d = np.asarray(delta, dtype=float)
    half = 0.5 * np.exp(-np.abs(d) / (2 * sigma2))
    out = np.where(d >= 0, half, 1 - half)
    return float(out) if out.ndim == 0 else out


def pairwise_mischoice_mc(delta: float, sigma2: float, trials: int, rng_seed: int):
    """Direct draw of two exponential noise powers; returns ``(estimate, stderr)``."""
    _check_sigma2(sigma2)
    rng = child_rng(rng_seed, 0)
    e = rng.exponential(2 * sigma2, size=(trials, 2))
    p = float(np.mean(e[:, 1] - e[:, 0] > delta))
    return p, math.sqrt(p * (1 - p) / trials)


def _elementary_symmetric(xs: list[Fraction]) -> list[Fraction]:
    e = [Fraction(1)] + [Fraction(0)] * len(xs)
    for i, x in enumerate(xs, start=1):
        for k in range(i, 0, -1):
            e[k] += x * e[k - 1]
    return e


def selection_prob_from_gains(gains, index: int, sigma2: float) -> float:
    """Probability that candidate ``index`` has the largest noisy power.

    Integrates the winner's noise over ``[e0, inf)`` and expands the product
    of the competitors' CDFs by inclusion-exclusion over competitor subsets:

    ``P = y * sum_k (-1)^k e_k(z) / (k + 1)``

    with ``z_i = exp(-(G_u - G_i + e0) / (2 sigma^2))``,
    ``y = exp(-e0 / (2 sigma^2))`` and ``e0 = max(0, max_i G_i - G_u)``.
    The alternating sum is evaluated in exact rational arithmetic, so equal
    gains give exactly ``1 / (number of candidates)``.
    """
    _check_sigma2(sigma2)
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1 or not 0 <= index < g.size:
        raise DomainError("index outside the candidate list")
    others = np.delete(g, index)
    if others.size > MAX_COMPETITORS:
        raise CapabilityError(
            f"{others.size} competitors exceed the enumeration cap of {MAX_COMPETITORS}; "
            "use selection_prob_mc"
        )
    if others.size == 0:
        return 1.0
    gu = g[index]
    e0 = max(0.0, float(others.max() - gu))
    if math.isinf(sigma2):
        z = [Fraction(1)] * others.size
        y = Fraction(1)
    else:
        lam = 1.0 / (2 * sigma2)
        z = [Fraction(math.exp(-lam * float(gu - gi + e0))) for gi in others]
        y = Fraction(math.exp(-lam * e0))
    e = _elementary_symmetric(z)
    total = sum(((-1) ** k) * ek / (k + 1) for k, ek in enumerate(e))
    return min(max(float(y * total), 0.0), 1.0)


def candidate_gains(zeta: float, k_window: int, cfg: ArrayConfig) -> np.ndarray:
    """Noiseless gains at offsets ``-K..K`` from the anchor."""
    if abs(zeta) > 1:
        raise DomainError("zeta outside [-1, 1]")
    if k_window < 0:
        raise DomainError("window must be nonnegative")
    k = np.arange(-k_window, k_window + 1)
    return np.atleast_1d(fejer_kernel(cfg.n_bs, math.pi * (zeta + 2 * k) / cfg.n_sc))


def selection_prob(zeta: float, k_u: int, k_window: int, sigma2: float, cfg: ArrayConfig) -> float:
    """Probability that the scan settles on the subcarrier ``k_u`` away from the anchor.

    Raises
    ------
    CapabilityError
        When ``2K > 20``; use :func:`selection_prob_mc` there.
    """
    if not -k_window <= k_u <= k_window:
        raise DomainError("k_u outside [-K, K]")
    if 2 * k_window > MAX_COMPETITORS:
        raise CapabilityError("2K > 20: subset enumeration disabled, use selection_prob_mc")
    return selection_prob_from_gains(candidate_gains(zeta, k_window, cfg), k_u + k_window, sigma2)


def _selection_shard(task):
    seed, k, trials, gains, sigma2 = task
    rng = child_rng(seed, 0, k)
    noisy = gains[None, :] + rng.exponential(2 * sigma2, size=(trials, gains.size))
    return np.bincount(np.argmax(noisy, axis=1), minlength=gains.size)


def selection_prob_mc(zeta: float, k_window: int, sigma2: float, cfg: ArrayConfig,
                      trials: int, rng_seed: int, workers: int = 1):
    """Empirical choice distribution over offsets ``-K..K``.

    Returns
    -------
    estimate, stderr : ndarray
        Arrays of length ``2K + 1``.
    """
    _check_sigma2(sigma2)
    gains = candidate_gains(zeta, k_window, cfg)
    tasks = [(rng_seed, k, t, gains, sigma2) for k, t in enumerate(shard_sizes(trials, MC_SHARD))]
    counts = sum(map_shards(_selection_shard, tasks, workers))
    p = counts / trials
    return p, np.sqrt(p * (1 - p) / trials)
