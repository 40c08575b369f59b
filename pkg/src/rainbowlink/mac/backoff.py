"""Backoff experiment on angular RB windows.

Every user sees ``2b + 1`` adjacent RBs centred on its anchor and needs ``T``
slots to deliver its payload. All pending users transmit at the same slot
on one random RB of their window; a user alone on its RB holds it for ``T``
slots and retires, colliders back off ``T`` slots and retry. Because all
colliders back off together, attempts happen in rounds of ``T`` slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..seeding import child_rng


@dataclass(frozen=True)
class BackoffResult:
    """Outcome averaged over MC trials.

    Attributes
    ----------
    total_slots : float
        Mean slots until every user finished; ``nan`` if some trial hit
        ``max_rounds`` first.
    residual : ndarray
        Mean fraction of users still pending after each round.
    utilization : ndarray
        Mean fraction of RBs carrying a successful payload in each slot.
    drained : bool
        Whether every trial finished within ``max_rounds``.
    slots_per_trial : ndarray
        Slots needed in each trial (``nan`` if undrained).
    """

    total_slots: float
    residual: np.ndarray
    utilization: np.ndarray
    drained: bool
    slots_per_trial: np.ndarray

    def completed_within(self, rounds: int) -> float:
        """Mean fraction of users finished after ``rounds`` rounds."""
        if rounds <= 0:
            return 0.0
        idx = min(rounds, self.residual.size) - 1
        return float(1.0 - self.residual[idx])


def _one_trial(anchors: np.ndarray, half_window: int, n_rb: int, rng, max_rounds: int):
    pending = np.arange(anchors.size)
    residual, used = [], []
    for _ in range(max_rounds):
        if pending.size == 0:
            break
        rb = np.mod(anchors[pending] + rng.integers(-half_window, half_window + 1, pending.size), n_rb)
        counts = np.bincount(rb, minlength=n_rb)
        alone = counts[rb] == 1
        used.append(int(np.count_nonzero(alone)))
        pending = pending[~alone]
        residual.append(pending.size / anchors.size)
    return residual, used, pending.size == 0


def backoff_experiment(
    u: int,
    half_window: int,
    payload_slots: int,
    n_rb: int,
    rng_seed: int,
    trials: int = 1,
    anchors=None,
    max_rounds: int = 10_000,
) -> BackoffResult:
    """Run the backoff protocol for ``u`` users with uniform angles.

    Parameters
    ----------
    u : int
        Users per trial.
    half_window : int
        ``b``; each user picks among ``2b + 1`` RBs.
    payload_slots : int
        ``T``; slots per payload and per backoff.
    n_rb : int
        RBs on the circle.
    rng_seed : int
    trials : int
        Independent placements to average over.
    anchors : array_like, optional
        Fixed anchor RBs instead of random angular placement.
    max_rounds : int
        Safety cap; with ``b = 0`` users sharing an anchor never finish.
    """
    if u < 1 or payload_slots < 1 or n_rb < 1 or trials < 1:
        raise DomainError("u, payload_slots, n_rb and trials must be positive")
    if half_window < 0 or 2 * half_window + 1 > n_rb:
        raise DomainError("window must fit on the RB circle")
    residuals, utils, slots = [], [], []
    drained_all = True
    for t in range(trials):
        rng = child_rng(rng_seed, t)
        if anchors is None:
            theta = rng.uniform(-math.pi / 2, math.pi / 2, u)
            a = np.floor(n_rb * np.sin(theta) / 2 + 0.5).astype(np.int64)
        else:
            a = np.asarray(anchors, dtype=np.int64)
            if a.size != u:
                raise DomainError("anchors must have one entry per user")
        residual, used, drained = _one_trial(a, half_window, n_rb, rng, max_rounds)
        drained_all &= drained
        residuals.append(residual)
        utils.append(np.repeat(np.asarray(used) / n_rb, payload_slots))
        slots.append(len(residual) * payload_slots if drained else math.nan)
    rounds = max(len(r) for r in residuals)
    res = np.zeros((trials, rounds))
    for i, r in enumerate(residuals):
        res[i, : len(r)] = r
        # after a trial drains its residual stays at its last value (zero)
        if len(r) < rounds:
            res[i, len(r):] = r[-1] if r else 0.0
    n_slots = rounds * payload_slots
    ut = np.zeros((trials, n_slots))
    for i, x in enumerate(utils):
        ut[i, : x.size] = x
    slots_arr = np.array(slots, dtype=float)
    total = float(np.mean(slots_arr)) if drained_all else math.nan
    return BackoffResult(total, res.mean(axis=0), ut.mean(axis=0), bool(drained_all), slots_arr)
