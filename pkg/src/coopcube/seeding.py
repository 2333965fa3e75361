"""Deterministic RNG stream derivation.

Every stochastic component draws from a stream derived from the master
seed plus a string key, so parallel or reordered execution cannot change
results: the stream for (seed, "participant", 7) is the same no matter
when it is created.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np


def derive_seed(seed: int, *parts: object) -> int:
    material = ":".join([str(seed), *[str(p) for p in parts]])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def child_rng(seed: int, *parts: object) -> random.Random:
    """Independent stdlib RNG stream for a derived key."""
    return random.Random(derive_seed(seed, *parts))


def stat_rng(seed: int, *parts: object) -> np.random.Generator:
    """Independent numpy Generator stream for a derived key."""
    return np.random.default_rng(derive_seed(seed, *parts))
