"""Poisson model of anchor collisions under uniform angular placement.

With users uniform in angle, the anchor of user u is ``round(B sin(theta)/2)``
wrapped onto ``B`` cells. Cell ``b`` covers ``sin(theta)`` in
``[(2b-1)/B, (2b+1)/B)``, so its hit rate is proportional to the arcsin
width of that interval. Cells near the end-fire directions are wider in
angle and collide far more often than cells at broadside.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..parallel import map_shards
from ..seeding import child_rng, shard_sizes

MC_SHARD = 500


def lambda_b(u: float, b, n_rb: int, mode: str = "exact"):
    """Poisson rate of users whose anchor is cell ``b``.

    Parameters
    ----------
    u : float
        Number of active users.
    b : int or array_like
        Signed cell index with ``|2b| < n_rb``.
    n_rb : int
        Number of cells ``B``.
    mode : {"exact", "approx"}
        ``exact`` integrates the uniform angle density over the cell;
        ``approx`` uses the density at the cell centre.

    Returns
    -------
    float or ndarray
    """
    b_arr = np.asarray(b, dtype=float)
    if np.any(np.abs(2 * b_arr) + 1 > n_rb):
        raise DomainError("cell index outside the visible range |2b+-1| <= B")
    if mode == "exact":
        hi = np.arcsin((2 * b_arr + 1) / n_rb)
        lo = np.arcsin((2 * b_arr - 1) / n_rb)
        lam = u * np.abs(hi - lo) / math.pi
    elif mode == "approx":
        lam = (u / n_rb) * (2 / math.pi) / np.sqrt(1 - (2 * b_arr / n_rb) ** 2)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return float(lam) if lam.ndim == 0 else lam


def collision_prob(lam):
    """Probability that a Poisson(``lam``) cell holds two or more users."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("rate must be nonnegative")
    # 1 - e^{-l}(1+l) written to keep precision for small l
    out = -np.expm1(-lam) - lam * np.exp(-lam)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _edge_rate(u: float, n_rb: int) -> float:
    # the wrapped cell B/2 == -B/2 collects both end-fire slivers
    return u * (math.pi - 2 * math.asin((n_rb - 1) / n_rb)) / math.pi


def expected_colliding_users(u: float, n_rb: int) -> float:
    """Mean number of users that share their anchor with someone else.

    Sums ``lambda_b (1 - exp(-lambda_b))`` over every cell of the circle,
    including the wrapped end-fire cell, so the total equals the placement
    average.
    """
    if u < 0:
        raise DomainError("user count must be nonnegative")
    if u == 0:
        return 0.0
    b = np.arange(-(n_rb // 2) + 1, (n_rb + 1) // 2)
    lam = lambda_b(u, b, n_rb)
    total = float(np.sum(lam * -np.expm1(-lam)))
    if n_rb % 2 == 0:
        le = _edge_rate(u, n_rb)
        total += le * -math.expm1(-le)
    return min(total, float(u))


def uniform_collision_fraction(u: float, n_rb: int) -> float:
    """Colliding fraction ``1 - exp(-U/B)`` if anchors were uniform over cells."""
    return -math.expm1(-u / n_rb)


def _anchor_cells(theta: np.ndarray, n_rb: int) -> np.ndarray:
    return np.floor(n_rb * np.sin(theta) / 2 + 0.5).astype(np.int64) % n_rb


def _collision_shard(task):
    seed, k, trials, u, n_rb = task
    rng = child_rng(seed, 0, k)
    cells = _anchor_cells(rng.uniform(-math.pi / 2, math.pi / 2, (trials, u)), n_rb)
    cells += (np.arange(trials, dtype=np.int64) * n_rb)[:, None]
    counts = np.bincount(cells.ravel(), minlength=trials * n_rb).reshape(trials, n_rb)
    shared = counts >= 2
    hits = shared.sum(axis=0)
    per_trial = np.where(shared, counts, 0).sum(axis=1)
    colliding = int(per_trial.sum())
    colliding_sq = int((per_trial**2).sum())
    return hits, colliding, colliding_sq


def _run_placement(u: int, n_rb: int, trials: int, rng_seed: int, workers: int):
    if trials < 1 or u < 0:
        raise DomainError("trials must be positive and u nonnegative")
    tasks = [(rng_seed, k, t, u, n_rb) for k, t in enumerate(shard_sizes(trials, MC_SHARD))]
    parts = map_shards(_collision_shard, tasks, workers)
    hits = sum(p[0] for p in parts)
    return hits, sum(p[1] for p in parts), sum(p[2] for p in parts)


def cell_index(b, n_rb: int):
    """Array position of signed cell index ``b`` in per-cell MC output."""
    return np.mod(b, n_rb)


def collision_prob_mc(u: int, n_rb: int, trials: int, rng_seed: int, workers: int = 1):
    """Per-cell collision frequency from direct uniform-angle placement.

    Returns
    -------
    estimate, stderr : ndarray
        Length ``n_rb`` arrays indexed by ``b mod n_rb``.
    """
    hits, _, _ = _run_placement(u, n_rb, trials, rng_seed, workers)
    p = hits / trials
    return p, np.sqrt(p * (1 - p) / trials)


def colliding_users_mc(u: int, n_rb: int, trials: int, rng_seed: int, workers: int = 1):
    """Mean and standard error of the number of users in shared cells."""
    _, s, s2 = _run_placement(u, n_rb, trials, rng_seed, workers)
    mean = s / trials
    var = max(s2 / trials - mean * mean, 0.0)
    return mean, math.sqrt(var / trials)
