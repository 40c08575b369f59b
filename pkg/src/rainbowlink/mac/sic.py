"""Peeling decoder for replicas on a user/RB bipartite graph."""

from __future__ import annotations

import numpy as np


def sic_peel(incidence) -> set[int]:
    """Users recovered by iterative interference cancellation.

    Parameters
    ----------
    incidence : array_like of bool, shape (users, rbs)
        ``True`` where a user placed a replica.

    Returns
    -------
    set of int
        Indices of decoded users. An RB holding exactly one undecoded
        replica decodes that user; the user's other replicas are then
        cancelled, which may free further RBs.
    """
    inc = np.asarray(incidence, dtype=bool)
    if inc.ndim != 2:
        raise ValueError("incidence must be a 2-D matrix")
    users, rbs = np.nonzero(inc)
    decoded = peel_edges(users, rbs, inc.shape[0], inc.shape[1])
    return set(np.flatnonzero(decoded).tolist())


def peel_edges(users: np.ndarray, rbs: np.ndarray, n_users: int, n_rbs: int) -> np.ndarray:
    """Edge-list form of :func:`sic_peel`; returns a boolean decoded mask."""
    decoded = np.zeros(n_users, dtype=bool)
    live = np.ones(users.size, dtype=bool)
    while True:
        deg = np.bincount(rbs[live], minlength=n_rbs)
        single = live & (deg[rbs] == 1)
        fresh = np.unique(users[single])
        fresh = fresh[~decoded[fresh]]
        if fresh.size == 0:
            return decoded
        decoded[fresh] = True
        live &= ~decoded[users]


def collision_decode(users: np.ndarray, rbs: np.ndarray, n_users: int, n_rbs: int) -> np.ndarray:
    """Users with at least one replica alone on its RB."""
    deg = np.bincount(rbs, minlength=n_rbs)
    ok = np.zeros(n_users, dtype=bool)
    ok[users[deg[rbs] == 1]] = True
    return ok
