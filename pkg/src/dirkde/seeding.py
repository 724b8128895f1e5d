"""Deterministic random streams keyed on integers."""
from __future__ import annotations

import hashlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k)
    # strings such as model ids map to a stable 32-bit integer
    return int.from_bytes(hashlib.sha256(str(k).encode()).digest()[:4], "little")


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *keys)``.

    Streams for distinct key tuples are statistically independent and do not
    depend on the order in which they are requested.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.default_rng(ss)
