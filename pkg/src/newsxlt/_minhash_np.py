"""Pure-numpy MinHash kernel, bit-identical to the compiled twin.

Arithmetic notes: permutations are ((a*h + b) mod p) with p = 2^61 - 1.
uint64 cannot hold the 125-bit product a*h directly, so the multiply is
decomposed into 31-bit halves and reduced with the Mersenne identity
2^61 = 1 (mod p). Every intermediate fits in uint64; the result is exact.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = np.uint64(14695981039346656037)
FNV_PRIME = np.uint64(1099511628211)

_P = np.uint64((1 << 61) - 1)
_M31 = np.uint64((1 << 31) - 1)
_M30 = np.uint64((1 << 30) - 1)
_S61 = np.uint64(61)
_S31 = np.uint64(31)
_S30 = np.uint64(30)

# soft cap on shingles per broadcast chunk, keeps temporaries around 8 MB
_CHUNK_SHINGLES = 4096


def _sub_p_if_ge(x: np.ndarray) -> np.ndarray:
    # masked subtract; np.where(x >= p, x - p, x) would underflow eagerly
    return x - (x >= _P).astype(np.uint64) * _P


def _fold61(x: np.ndarray) -> np.ndarray:
    """Reduce below 2^61 + small using 2^61 = 1 (mod p), then below p."""
    x = (x & _P) + (x >> _S61)
    return _sub_p_if_ge(x)


def _perm_hash(h: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a*h + b) mod p elementwise with broadcasting; h any uint64, a,b < p."""
    h = _fold61(h)
    a1, a0 = a >> _S31, a & _M31
    h1, h0 = h >> _S31, h & _M31
    # a*h = a1*h1*2^62 + (a1*h0 + a0*h1)*2^31 + a0*h0; 2^62 = 2 (mod p)
    top = a1 * h1
    top = _sub_p_if_ge(top + top)
    cross = _fold61(a1 * h0 + a0 * h1)
    cross = _sub_p_if_ge((cross >> _S30) + ((cross & _M30) << _S31))
    low = _fold61(a0 * h0)
    acc = _sub_p_if_ge(top + cross)
    acc = acc + low + b
    acc = _sub_p_if_ge(_sub_p_if_ge(acc))
    return acc


def shingle_hashes_batch(
    token_hashes: np.ndarray, offsets: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Hash word n-gram shingles for a batch of texts.

    ``token_hashes`` concatenates per-text token hashes; text t spans
    ``offsets[t]:offsets[t+1]``. A text with fewer than n tokens yields one
    shingle covering its whole token sequence. Returns the concatenated
    shingle hashes plus matching offsets.
    """
    tok = np.ascontiguousarray(token_hashes, dtype=np.uint64)
    off = np.ascontiguousarray(offsets, dtype=np.int64)
    lengths = off[1:] - off[:-1]
    if lengths.size and int(lengths.min()) <= 0:
        raise ValueError("every text must contribute at least one token")
    counts = np.where(lengths >= n, lengths - n + 1, 1)
    out_offsets = np.zeros(len(off), dtype=np.int64)
    np.cumsum(counts, out=out_offsets[1:])
    out = np.empty(int(out_offsets[-1]), dtype=np.uint64)

    long_mask = lengths >= n
    if long_mask.any():
        seg_counts = counts[long_mask]
        seg_end = np.cumsum(seg_counts)
        within = np.arange(int(seg_end[-1]), dtype=np.int64) - np.repeat(seg_end - seg_counts, seg_counts)
        tok_start = np.repeat(off[:-1][long_mask], seg_counts) + within
        h = np.full(len(tok_start), FNV_OFFSET, dtype=np.uint64)
        for k in range(n):
            h = (h ^ tok[tok_start + k]) * FNV_PRIME
        out[np.repeat(out_offsets[:-1][long_mask], seg_counts) + within] = h

    short_mask = ~long_mask
    if short_mask.any():
        s_lengths = lengths[short_mask]
        s_tok_start = off[:-1][short_mask]
        s_out = out_offsets[:-1][short_mask]
        for l in np.unique(s_lengths):
            grp = s_lengths == l
            starts = s_tok_start[grp]
            h = np.full(len(starts), FNV_OFFSET, dtype=np.uint64)
            for k in range(int(l)):
                h = (h ^ tok[starts + k]) * FNV_PRIME
            out[s_out[grp]] = h
    return out, out_offsets


def signatures_batch(
    shingle_hashes: np.ndarray, offsets: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Per-text MinHash signatures: minimum of (a_i*h + b_i) mod p per text.

    ``shingle_hashes``/``offsets`` follow the layout of
    :func:`shingle_hashes_batch`. Returns a (texts, permutations) uint64 array.
    """
    hashes = np.ascontiguousarray(shingle_hashes, dtype=np.uint64)
    off = np.ascontiguousarray(offsets, dtype=np.int64)
    av = np.ascontiguousarray(a, dtype=np.uint64)
    bv = np.ascontiguousarray(b, dtype=np.uint64)
    n_texts = len(off) - 1
    sig = np.empty((n_texts, len(av)), dtype=np.uint64)
    if n_texts and int((off[1:] - off[:-1]).min()) <= 0:
        raise ValueError("every text must contribute at least one shingle")
    i = 0
    while i < n_texts:
        j = i + 1
        while j < n_texts and off[j + 1] - off[i] <= _CHUNK_SHINGLES:
            j += 1
        vals = _perm_hash(hashes[off[i] : off[j], None], av[None, :], bv[None, :])
        sig[i:j] = np.minimum.reduceat(vals, off[i : j] - off[i], axis=0)
        i = j
    return sig
