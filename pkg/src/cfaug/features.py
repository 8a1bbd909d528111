"""Hashed n-gram features and the pairwise input encoding.

Feature hashing is FNV-1a (64-bit) over UTF-8 n-gram strings, modded
into a power-of-two dimension, so vectors are bit-stable across runs
and platforms with no fitting step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractError
from .grammar import Token
from .rngs import fnv1a64

PC = "PC"
CAPC = "CAPC"


@dataclass(frozen=True)
class FeaturizerConfig:
    n_gram_orders: frozenset[int] = frozenset({1, 2})
    dimension: int = 2**14

    def __post_init__(self) -> None:
        if not self.n_gram_orders:
            raise ConfigError("n_gram_orders must be nonempty")
        if not self.n_gram_orders <= {1, 2}:
            raise ConfigError("n_gram_orders must be a subset of {1, 2}")
        if self.dimension < 2**8 or self.dimension & (self.dimension - 1):
            raise ConfigError("dimension must be a power of two >= 2^8")


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray
    dimension: int

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise ContractError("indices and values must have equal length")
        if len(self.indices) and (
            np.any(np.diff(self.indices) <= 0)
            or self.indices[0] < 0
            or self.indices[-1] >= self.dimension
        ):
            raise ContractError("indices must be strictly increasing in [0, dimension)")

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dimension)
        dense[self.indices] = self.values
        return dense


_HASH_CACHE: dict[str, int] = {}


def _ngram_hash(ngram: str) -> int:
    h = _HASH_CACHE.get(ngram)
    if h is None:
        h = fnv1a64(ngram.encode("utf-8"))
        _HASH_CACHE[ngram] = h
    return h


def featurize(tokens: Sequence[Token] | Sequence[str], config: FeaturizerConfig) -> SparseVector:
    """L2-normalized counts of hashed n-grams over token surfaces."""
    if not tokens:
        raise ContractError("cannot featurize an empty token sequence")
    surfaces = [t.surface if isinstance(t, Token) else t for t in tokens]
    counts: dict[int, float] = {}
    if 1 in config.n_gram_orders:
        for s in surfaces:
            idx = _ngram_hash(s) % config.dimension
            counts[idx] = counts.get(idx, 0.0) + 1.0
    if 2 in config.n_gram_orders:
        for a, b in zip(surfaces, surfaces[1:]):
            idx = _ngram_hash(a + "_" + b) % config.dimension
            counts[idx] = counts.get(idx, 0.0) + 1.0
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values /= np.linalg.norm(values)
    return SparseVector(indices, values, config.dimension)


def pair_dimension(base_dimension: int, mode: str) -> int:
    if mode == PC:
        return 2 * base_dimension + 2
    if mode == CAPC:
        return 2 * base_dimension + 6
    raise ConfigError(f"unknown pair mode {mode!r}")


def encode_pair(
    x: SparseVector,
    cx: SparseVector,
    y: int,
    mode: str,
    f_probs: tuple[np.ndarray, np.ndarray] | None = None,
) -> SparseVector:
    """Block concatenation [x | cx | one-hot(y) | f(x) | f(cx)].

    Block offsets, with D the sentence dimension: x at [0, D), cx at
    [D, 2D), one-hot(y) at [2D, 2D+2), and for CAPC the probabilities
    of the base classifier on x at [2D+2, 2D+4) and on cx at
    [2D+4, 2D+6).  PC encodings are the exact prefix of CAPC encodings.
    """
    if x.dimension != cx.dimension:
        raise ContractError("x and cx must share a dimension")
    if y not in (0, 1):
        raise ContractError("y must be 0 or 1")
    d = x.dimension
    if mode == PC:
        if f_probs is not None:
            raise ContractError("PC encoding must not receive f_probs")
        extra_idx: list[int] = []
        extra_val: list[float] = []
    elif mode == CAPC:
        if f_probs is None:
            raise ContractError("CAPC encoding requires f_probs")
        p_x, p_cx = f_probs
        if len(p_x) != 2 or len(p_cx) != 2:
            raise ContractError("f_probs must be two binary probability vectors")
        extra_idx = [2 * d + 2, 2 * d + 3, 2 * d + 4, 2 * d + 5]
        extra_val = [p_x[0], p_x[1], p_cx[0], p_cx[1]]
    else:
        raise ConfigError(f"unknown pair mode {mode!r}")
    indices = np.concatenate(
        [x.indices, cx.indices + d, [2 * d + y], extra_idx]
    ).astype(np.int64)
    values = np.concatenate([x.values, cx.values, [1.0], extra_val])
    keep = values != 0.0
    return SparseVector(indices[keep], values[keep], pair_dimension(d, mode))
