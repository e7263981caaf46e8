"""Deterministic random streams derived from a master seed."""
from __future__ import annotations

import hashlib
import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part)
    # stable across processes, unlike hash()
    return zlib.crc32(str(part).encode())


def stream(seed, *keys):
    """Independent generator for ``(seed, *keys)``; keys may be ints or labels."""
    return np.random.default_rng(np.random.SeedSequence([_key(seed), *(_key(k) for k in keys)]))


def derive_seed(seed, label):
    """63-bit seed from a master seed and a label, e.g. a sweep parameter value."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
