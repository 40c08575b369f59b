"""Deterministic seed expansion.

A master seed is expanded into independent child streams with a
counter-based split: child ``k`` of master ``s`` is
``numpy.random.SeedSequence(entropy=s, spawn_key=(k,))``, and nested keys
extend the tuple. Results that are aggregated over children are summed per
child, so they do not depend on how children are distributed over workers.
"""

from __future__ import annotations

import numpy as np


def child_sequence(master_seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))


def child_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Generator for the child stream addressed by ``keys`` under ``master_seed``."""
    return np.random.default_rng(child_sequence(master_seed, *keys))


def as_rng(seed_or_rng: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def shard_sizes(trials: int, shard: int) -> list[int]:
    """Split ``trials`` into fixed-size shards (last one possibly short)."""
    full, rest = divmod(int(trials), int(shard))
    return [shard] * full + ([rest] if rest else [])
