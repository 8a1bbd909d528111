"""Deterministic derivation of independent random streams.

Streams are keyed by (seed, *labels) so that per-item work is
order-independent: scoring item "b" before item "a" never changes either
result.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _as_entropy(key: int | str) -> int:
    if isinstance(key, str):
        return fnv1a64(key.encode("utf-8"))
    return key & _MASK64


def derive_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Generator for the stream identified by (seed, *keys)."""
    entropy = [seed & _MASK64] + [_as_entropy(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *keys: int | str) -> int:
    """Stable 64-bit sub-seed for the stream identified by (seed, *keys)."""
    entropy = [seed & _MASK64] + [_as_entropy(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
