# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled MinHash kernel; see _minhash_np for the interface contract.

Uses 128-bit intermediates for the (a*h + b) mod 2^61-1 permutation hash,
reduced with the Mersenne identity 2^61 = 1 (mod p). Output is bit-identical
to the numpy fallback.
"""

import numpy as np

FNV_OFFSET = np.uint64(14695981039346656037)
FNV_PRIME = np.uint64(1099511628211)

cdef extern from *:
    ctypedef unsigned long long u128 "__uint128_t"

cdef unsigned long long _FNV_OFFSET_C = 14695981039346656037ULL
cdef unsigned long long _FNV_PRIME_C = 1099511628211ULL
cdef unsigned long long _P = 2305843009213693951ULL  # 2^61 - 1
cdef unsigned long long _MAX64 = 18446744073709551615ULL


cdef inline unsigned long long _mod_p(u128 x) noexcept nogil:
    x = (x & <u128>_P) + (x >> 61)
    x = (x & <u128>_P) + (x >> 61)
    if x >= <u128>_P:
        x = x - <u128>_P
    return <unsigned long long>x


def shingle_hashes_batch(token_hashes, offsets, int n):
    """Hash word n-gram shingles for a batch of texts (see numpy twin)."""
    cdef const unsigned long long[::1] tok = np.ascontiguousarray(token_hashes, dtype=np.uint64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n_texts = off.shape[0] - 1
    cdef Py_ssize_t t, k, s, pos
    cdef long long length, count

    counts = np.empty(n_texts, dtype=np.int64)
    cdef long long[::1] counts_v = counts
    for t in range(n_texts):
        length = off[t + 1] - off[t]
        if length <= 0:
            raise ValueError("every text must contribute at least one token")
        counts_v[t] = length - n + 1 if length >= n else 1
    out_offsets = np.zeros(n_texts + 1, dtype=np.int64)
    np.cumsum(counts, out=out_offsets[1:])
    out = np.empty(int(out_offsets[-1]), dtype=np.uint64)

    cdef const long long[::1] out_off = out_offsets
    cdef unsigned long long[::1] out_v = out
    cdef unsigned long long h
    cdef long long width
    with nogil:
        for t in range(n_texts):
            length = off[t + 1] - off[t]
            count = counts_v[t]
            width = n if length >= n else length
            for s in range(count):
                h = _FNV_OFFSET_C
                pos = off[t] + s
                for k in range(width):
                    h = (h ^ tok[pos + k]) * _FNV_PRIME_C
                out_v[out_off[t] + s] = h
    return out, out_offsets


def signatures_batch(shingle_hashes, offsets, a, b):
    """Per-text MinHash signatures (see numpy twin for the contract)."""
    cdef const unsigned long long[::1] hashes = np.ascontiguousarray(shingle_hashes, dtype=np.uint64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const unsigned long long[::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef const unsigned long long[::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t n_texts = off.shape[0] - 1
    cdef Py_ssize_t m = av.shape[0]
    cdef Py_ssize_t t, i, s

    sig = np.empty((n_texts, m), dtype=np.uint64)
    cdef unsigned long long[:, ::1] sig_v = sig
    cdef unsigned long long best, val, ai, bi

    for t in range(n_texts):
        if off[t + 1] - off[t] <= 0:
            raise ValueError("every text must contribute at least one shingle")
    with nogil:
        for t in range(n_texts):
            for i in range(m):
                ai = av[i]
                bi = bv[i]
                best = _MAX64
                for s in range(off[t], off[t + 1]):
                    val = _mod_p(<u128>ai * <u128>hashes[s] + <u128>bi)
                    if val < best:
                        best = val
                sig_v[t, i] = best
    return sig
