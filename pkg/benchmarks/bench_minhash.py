#!/usr/bin/env python3
"""Benchmark the compiled MinHash kernel against the numpy fallback.

Both kernels get the exact same pre-hashed token arrays, so the numbers
isolate the shingle-fold and permutation loops. Outputs are checked for
bit equality before timings are reported.

Usage: python3 benchmarks/bench_minhash.py [--texts N] [--perms P] [--repeats R]
"""

import argparse
import random
import time

import numpy as np

from newsxlt import minhash
from newsxlt import _minhash_np


def make_texts(count: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(20000)]
    texts = []
    for _ in range(count):
        length = rng.randrange(10, 61)
        texts.append(" ".join(rng.choice(vocab) for _ in range(length)))
    return texts


def bench_kernel(kernel, token_hashes, offsets, shingle_n, a, b, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        shingles, shingle_offsets = kernel.shingle_hashes_batch(token_hashes, offsets, shingle_n)
        sigs = kernel.signatures_batch(shingles, shingle_offsets, a, b)
        best = min(best, time.perf_counter() - start)
        result = (shingles, shingle_offsets, sigs)
    return best, result


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--texts", type=int, default=2000)
    parser.add_argument("--perms", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    kernels = {"python": _minhash_np}
    try:
        from newsxlt import _minhash_cy

        kernels["compiled"] = _minhash_cy
    except ImportError:
        print("note: compiled extension not built, benchmarking the fallback only")

    texts = make_texts(args.texts, args.seed)
    tokens = [minhash.tokenize(text) for text in texts]
    token_hashes, offsets = minhash._hash_token_batch(tokens)
    a, b = minhash.make_permutations(args.perms, seed=args.seed)
    n_shingles = sum(max(1, len(t) - 4) for t in tokens)
    print(f"{args.texts} texts, {n_shingles} shingles, {args.perms} permutations, best of {args.repeats}")

    results = {}
    for name, kernel in kernels.items():
        elapsed, output = bench_kernel(kernel, token_hashes, offsets, 5, a, b, args.repeats)
        results[name] = (elapsed, output)
        rate = n_shingles * args.perms / elapsed
        print(f"{name:>9}: {elapsed * 1000:8.1f} ms   {rate / 1e6:8.1f} M perm-hashes/s")

    if len(results) == 2:
        (sh_p, off_p, sig_p) = results["python"][1]
        (sh_c, off_c, sig_c) = results["compiled"][1]
        identical = (
            np.array_equal(sh_p, sh_c)
            and np.array_equal(off_p, off_c)
            and np.array_equal(sig_p, sig_c)
        )
        if not identical:
            print("ERROR: kernels disagree")
            return 1
        print(f"outputs identical; speedup {results['python'][0] / results['compiled'][0]:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
