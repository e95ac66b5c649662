"""Deterministic named-stream random number generators.

Every random decision in the toolkit draws from a stream derived from one
top-level seed plus a purpose string, so independent components never share
or collide streams and a whole pipeline is reproducible from a single seed.
"""

import hashlib

import numpy as np


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Return a Generator for `purpose`, derived from the top-level seed.

    The derivation hashes (seed, purpose) with SHA-256, so it is stable
    across processes and platforms (unlike the builtin `hash`).
    """
    digest = hashlib.sha256(f"{seed}:{purpose}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))
