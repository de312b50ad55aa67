"""MinHash signatures over word-shingled text.

Shingling: texts are lowercased, split on whitespace, and shingled into
word n-grams (default n=5); a text with fewer than n tokens contributes its
whole token sequence as one shingle. Tokens are hashed with BLAKE2b to 64
bits and shingles fold token hashes FNV-1a style, so shingle hashes are
stable across platforms and sessions.

Permutations: index i maps a shingle hash h to (a_i*h + b_i) mod (2^61 - 1)
with (a_i, b_i) drawn from a splitmix64 stream seeded by the config seed.
The signature is the per-permutation minimum over all shingles.

The inner loops live in a compiled extension (newsxlt._minhash_cy) with a
bit-identical numpy fallback (newsxlt._minhash_np). Selection happens at
import; set NEWSXLT_KERNEL=python to force the fallback or =compiled to
require the extension.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from . import _minhash_np

MERSENNE_P = (1 << 61) - 1

_MASK64 = (1 << 64) - 1


class _Config(Protocol):
    minhash_permutations: int
    shingle_n: int
    seed: int


def _select_kernel():
    choice = os.environ.get("NEWSXLT_KERNEL", "auto")
    if choice not in ("auto", "compiled", "python"):
        raise ValueError(f"NEWSXLT_KERNEL must be auto, compiled, or python, got {choice!r}")
    if choice == "python":
        return _minhash_np
    try:
        from . import _minhash_cy  # type: ignore[attr-defined]

        return _minhash_cy
    except ImportError:
        if choice == "compiled":
            raise ImportError("NEWSXLT_KERNEL=compiled but the extension is not built")
        return _minhash_np


_kernel = _select_kernel()


def kernel_name() -> str:
    """Which kernel is active: 'compiled' or 'python'."""
    return "python" if _kernel is _minhash_np else "compiled"


def _splitmix64(seed: int):
    x = seed & _MASK64
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def make_permutations(count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Derive permutation parameters (a_i in [1, p-1], b_i in [0, p-1])."""
    if count < 1:
        raise ValueError("permutation count must be positive")
    stream = _splitmix64(seed)
    a = np.empty(count, dtype=np.uint64)
    b = np.empty(count, dtype=np.uint64)
    for i in range(count):
        a[i] = 1 + next(stream) % (MERSENNE_P - 1)
        b[i] = next(stream) % MERSENNE_P
    return a, b


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens, the shingling unit."""
    return text.lower().split()


def _token_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


def _hash_token_batch(texts_tokens: Sequence[list[str]]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated token hashes plus per-text offsets, with a vocab cache."""
    cache: dict[str, int] = {}
    offsets = np.zeros(len(texts_tokens) + 1, dtype=np.int64)
    flat: list[int] = []
    for t, tokens in enumerate(texts_tokens):
        for token in tokens:
            h = cache.get(token)
            if h is None:
                h = _token_hash(token)
                cache[token] = h
            flat.append(h)
        offsets[t + 1] = len(flat)
    return np.array(flat, dtype=np.uint64), offsets


def signatures_for_texts(
    texts: Iterable[str], shingle_n: int, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """MinHash signatures for many texts at once; rows follow input order."""
    tokens = [tokenize(text) for text in texts]
    for t, toks in enumerate(tokens):
        if not toks:
            raise ValueError(f"cannot shingle empty text (position {t})")
    token_hashes, tok_offsets = _hash_token_batch(tokens)
    shingles, shingle_offsets = _kernel.shingle_hashes_batch(token_hashes, tok_offsets, shingle_n)
    return _kernel.signatures_batch(shingles, shingle_offsets, a, b)


@dataclass(frozen=True)
class MinHashSignature:
    """Fixed-length vector of per-permutation minima for one text."""

    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MinHashSignature):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))


def minhash_signature(text: str, config: _Config) -> MinHashSignature:
    """Signature of one normalized text under the configured permutations.

    Raises ValueError on empty text (nothing to shingle).
    """
    if not tokenize(text):
        raise ValueError("cannot shingle empty text")
    a, b = make_permutations(config.minhash_permutations, config.seed)
    sig = signatures_for_texts([text], config.shingle_n, a, b)[0]
    return MinHashSignature(values=sig)


def estimated_jaccard(sig1: MinHashSignature, sig2: MinHashSignature) -> float:
    """Fraction of matching signature positions, an unbiased Jaccard estimate."""
    v1, v2 = sig1.values, sig2.values
    if len(v1) != len(v2):
        raise ValueError("signatures differ in permutation count")
    return float(np.count_nonzero(v1 == v2)) / len(v1)
