"""Deterministic seed derivation shared across modules.

Derived streams are keyed by hashing the base seed with string parts, so
parallel and serial execution orders see identical randomness.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(base: int, *parts) -> int:
    """Stable 32-bit child seed from a base seed and context labels."""
    key = "|".join([str(int(base))] + [str(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def rng_for(base: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *parts))
