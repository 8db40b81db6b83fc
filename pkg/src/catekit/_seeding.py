"""Seed derivation helpers.

Every random draw in the package flows from an explicit 64-bit seed. Sub-seeds
are derived by hashing the parent seed together with a role tag, so a learner
with more sub-models never shifts the random stream of another one.
"""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, *tags: object) -> int:
    """Return a 64-bit seed that depends only on ``master`` and ``tags``."""
    payload = "|".join([str(int(master) & SEED_MASK), *map(str, tags)])
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))
