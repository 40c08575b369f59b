"""Packet loss under repetition-based frame-slotted Aloha on a sliding band.

A tagged user transmits ``n`` replicas on distinct RBs of its ``K``-RB band.
Every competitor whose band overlaps the tagged band marks the RBs where its
own replicas land. The packet is lost when all tagged replicas sit on marked
RBs. The number of marked RBs evolves as a Markov chain over overlapping
competitors; the chain assumes the marked set is exchangeable within the
band, which becomes inaccurate when ``n`` approaches ``K``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Literal

import numpy as np
from scipy.stats import binom

from ..errors import ConfigError, DomainError
from ..parallel import map_shards
from ..seeding import child_rng, shard_sizes

MC_SHARD = 20_000
_MAX_MASK_BITS = 62
_SUBSET_TABLE_LIMIT = 1 << 16


@dataclass(frozen=True)
class PlrParams:
    """Parameters of the loss model.

    Attributes
    ----------
    n_rb_total : int
        RBs in the whole band, ``B / G``.
    k_rb : int
        RBs per user band, ``K``.
    n_users : int
        Active users ``U`` including the tagged one.
    n_rep : int
        Replicas per packet ``n``.
    grouping : int
        Subcarriers per RB ``G``.
    """

    n_rb_total: int
    k_rb: int
    n_users: int
    n_rep: int
    grouping: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.n_rep <= self.k_rb:
            raise ConfigError("need 1 <= n_rep <= k_rb")
        if self.k_rb > self.n_rb_total:
            raise ConfigError("k_rb exceeds n_rb_total")
        if self.n_users < 1 or self.grouping < 1:
            raise ConfigError("n_users and grouping must be at least 1")

    @property
    def overlap_prob(self) -> float:
        """Probability that a uniformly placed competitor band overlaps the tagged one."""
        n_sc = self.n_rb_total * self.grouping
        return self.grouping * (2 * self.k_rb - 1) / n_sc


def _comb_table(k: int) -> np.ndarray:
    c = np.zeros((k + 1, k + 1))
    for a in range(k + 1):
        for b in range(a + 1):
            c[a, b] = math.comb(a, b)
    return c


def _transition_appendix(k: int, n: int) -> np.ndarray:
    c = _comb_table(k)
    # Q[j]: probability that an overlapping competitor drops j replicas inside the band
    q = np.zeros(n + 1)
    for ov in range(1, k + 1):
        w = (2 if ov < k else 1) / (2 * k - 1)
        for j in range(n + 1):
            if n - j <= k - ov and j <= ov:
                q[j] += w * math.comb(k - ov, n - j) * math.comb(ov, j) / math.comb(k, n)
    t = np.zeros((k + 1, k + 1))
    m1 = np.arange(k + 1)
    for j in range(n + 1):
        if q[j] == 0:
            continue
        for d in range(j + 1):
            ok = m1 + d <= k
            rows = m1[ok]
            val = c[k - rows, d] * c[rows, j - d] / math.comb(k, j)
            t[rows, rows + d] += q[j] * val
    return t


def _transition_consolidated(k: int, n: int) -> np.ndarray:
    # the single-expression form, kept only to document how it departs from the composed one
    t = np.zeros((k + 1, k + 1))
    norm = (2 * k - 1) * math.comb(k, n)
    for m1 in range(k + 1):
        for m2 in range(m1, k + 1):
            d = m2 - m1
            first = math.comb(k - m1, d) * _comb(m1, n - d) / norm
            rest = 0.0
            for j in range(n + 1):
                for kk in range(2, k + 1):
                    rest += 2 * _comb(k - kk, n - j) * math.comb(k - m1, d) * _comb(m1, j - d) / norm
            t[m1, m2] = first + rest
    return t


def _comb(a: int, b: int) -> int:
    return math.comb(a, b) if 0 <= b <= a else 0


def plr_transition_matrix(
    k_rb: int, n_rep: int, form: Literal["appendix", "consolidated"] = "appendix"
) -> np.ndarray:
    """Transition matrix of the marked-RB count for one overlapping competitor.

    Entry ``[m1, m2]`` is the probability that ``m1`` marked RBs become
    ``m2`` after a competitor whose band overlaps the tagged band. The
    default ``appendix`` form composes three distributions (overlap width,
    replicas inside the band, new RBs among them) and is row-stochastic.
    ``consolidated`` evaluates the one-line closed form literally; it is not
    stochastic and exists for comparison only.
    """
    if not 1 <= n_rep <= k_rb:
        raise ConfigError("need 1 <= n_rep <= k_rb")
    if form == "appendix":
        return _transition_appendix(k_rb, n_rep)
    if form == "consolidated":
        return _transition_consolidated(k_rb, n_rep)
    raise ValueError(f"unknown form {form!r}")


def transition_matrix_enumerated(k_rb: int, n_rep: int) -> np.ndarray:
    """Exact rational transition matrix by enumeration, for small ``K``.

    For each count ``m1`` it averages over every marked set of that size,
    every overlapping offset and every replica subset of the competitor.
    Cost grows like ``4^K``; meant as a test oracle for ``K <= 6``.
    """
    k, n = k_rb, n_rep
    t = [[Fraction(0)] * (k + 1) for _ in range(k + 1)]
    offsets = range(-(k - 1), k)
    subsets = list(itertools.combinations(range(k), n))
    for m1 in range(k + 1):
        marked_sets = list(itertools.combinations(range(k), m1))
        weight = Fraction(1, len(marked_sets) * len(offsets) * len(subsets))
        for marked in marked_sets:
            base = set(marked)
            for o in offsets:
                for sub in subsets:
                    hit = {o + s for s in sub if 0 <= o + s < k}
                    t[m1][len(base | hit)] += weight
    return np.array([[float(x) for x in row] for row in t])


def _loss_given_marked(k: int, n: int) -> np.ndarray:
    return np.array([math.comb(j, n) / math.comb(k, n) for j in range(k + 1)])


def _loss_by_competitors(k: int, n: int, i_max: int) -> np.ndarray:
    """Loss probability given ``i`` overlapping competitors, ``i = 0..i_max``."""
    t = _transition_appendix(k, n)
    loss = _loss_given_marked(k, n)
    p = np.zeros(k + 1)
    p[0] = 1.0
    out = np.empty(i_max + 1)
    out[0] = p @ loss
    for i in range(1, i_max + 1):
        p = p @ t
        out[i] = p @ loss
    return out


def _overlap_prob_checked(params: PlrParams) -> float:
    q = params.overlap_prob
    if q > 1:
        raise ConfigError("overlap probability exceeds 1: too few RBs for this band width")
    return q


def plr(params: PlrParams) -> float:
    """Approximate packet loss rate.

    Averages the Markov-chain loss over a binomial number of overlapping
    competitors among the ``U - 1`` others.
    """
    q = _overlap_prob_checked(params)
    u1 = params.n_users - 1
    if u1 == 0:
        return 0.0
    by_i = _loss_by_competitors(params.k_rb, params.n_rep, u1)
    i = np.arange(1, u1 + 1)
    val = float(np.sum(binom.pmf(i, u1, q) * by_i[1:]))
    return min(max(val, 0.0), 1.0)


def plr_curve(params: PlrParams, users) -> np.ndarray:
    """:func:`plr` for several user counts, reusing one chain evaluation."""
    users = np.asarray(users, dtype=int)
    if users.size == 0:
        return np.zeros(0)
    if np.any(users < 1):
        raise ConfigError("user counts must be at least 1")
    q = _overlap_prob_checked(params)
    by_i = _loss_by_competitors(params.k_rb, params.n_rep, int(users.max()) - 1)
    out = np.empty(users.size)
    for idx, u in enumerate(users):
        i = np.arange(1, u)
        out[idx] = np.clip(np.sum(binom.pmf(i, u - 1, q) * by_i[1:u]), 0.0, 1.0)
    return out


def optimal_repetitions(params: PlrParams) -> int:
    """``argmin_n plr`` over ``n = 1..K``; ties go to the smaller ``n``."""
    values = [plr(replace(params, n_rep=n)) for n in range(1, params.k_rb + 1)]
    return int(np.argmin(values)) + 1


def _random_masks(rng: np.random.Generator, shape, k: int, n: int, table) -> np.ndarray:
    if table is not None:
        return table[rng.integers(0, table.size, size=shape)]
    keys = rng.random(tuple(shape) + (k,))
    picks = np.argpartition(keys, n - 1, axis=-1)[..., :n]
    return np.sum(np.left_shift(np.int64(1), picks.astype(np.int64)), axis=-1)


def _subset_table(k: int, n: int):
    if math.comb(k, n) > _SUBSET_TABLE_LIMIT:
        return None
    return np.array([sum(1 << i for i in c) for c in itertools.combinations(range(k), n)], dtype=np.int64)


def _oracle_shard(task):
    seed, shard, trials, nrb, k, u, n = task
    rng = child_rng(seed, 0, shard)
    table = _subset_table(k, n)
    full = (1 << k) - 1
    start = rng.integers(0, nrb, size=(trials, u - 1))
    # signed offset of each competitor band relative to the tagged band at 0
    off = np.where(start > nrb - k, start - nrb, start)
    masks = _random_masks(rng, (trials, u - 1), k, n, table)
    shifted = np.where(
        off >= 0,
        np.left_shift(masks, np.clip(off, 0, k)),
        np.right_shift(masks, np.clip(-off, 0, k)),
    )
    shifted = np.where(np.abs(off) < k, shifted & full, 0)
    marked = np.bitwise_or.reduce(shifted, axis=1)
    tagged = _random_masks(rng, (trials,), k, n, table)
    return int(np.count_nonzero(tagged & ~marked == 0))


def plr_oracle_mc(params: PlrParams, trials: int, rng_seed: int, workers: int = 1) -> tuple[float, float]:
    """Monte Carlo loss rate with explicit band placement.

    Competitor bands start uniformly on the circular RB grid; replica sets
    are uniform ``n``-subsets of each band. Returns ``(estimate, stderr)``.
    """
    if trials < 1:
        raise DomainError("trials must be positive")
    _overlap_prob_checked(params)
    k, n, u = params.k_rb, params.n_rep, params.n_users
    if k > _MAX_MASK_BITS:
        raise DomainError(f"k_rb above {_MAX_MASK_BITS} not supported by the bitmask oracle")
    if u == 1:
        return 0.0, 0.0
    tasks = [
        (rng_seed, s, t, params.n_rb_total, k, u, n)
        for s, t in enumerate(shard_sizes(trials, MC_SHARD))
    ]
    lost = sum(map_shards(_oracle_shard, tasks, workers))
    p = lost / trials
    return p, math.sqrt(p * (1 - p) / trials)
