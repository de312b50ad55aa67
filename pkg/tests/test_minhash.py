import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsxlt import minhash
from newsxlt import _minhash_np as np_kernel
from newsxlt.minhash import (
    MERSENNE_P,
    MinHashSignature,
    estimated_jaccard,
    make_permutations,
    minhash_signature,
    signatures_for_texts,
    tokenize,
)

try:
    from newsxlt import _minhash_cy as cy_kernel
except ImportError:
    cy_kernel = None


class Cfg:
    minhash_permutations = 64
    shingle_n = 5
    seed = 0


def splitmix64_reference(seed):
    """Direct big-int transcription of the published splitmix64 stream."""
    state = seed & 0xFFFFFFFFFFFFFFFF
    while True:
        state = (state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        yield z ^ (z >> 31)


class TestPermutations:
    def test_matches_splitmix64_reference(self):
        ref = splitmix64_reference(42)
        a, b = make_permutations(3, seed=42)
        for i in range(3):
            assert int(a[i]) == 1 + next(ref) % (MERSENNE_P - 1)
            assert int(b[i]) == next(ref) % MERSENNE_P

    def test_ranges(self):
        a, b = make_permutations(512, seed=9)
        assert int(a.min()) >= 1 and int(a.max()) < MERSENNE_P
        assert int(b.min()) >= 0 and int(b.max()) < MERSENNE_P

    def test_deterministic_and_seed_sensitive(self):
        a1, b1 = make_permutations(16, seed=5)
        a2, b2 = make_permutations(16, seed=5)
        a3, _ = make_permutations(16, seed=6)
        assert np.array_equal(a1, a2) and np.array_equal(b1, b2)
        assert not np.array_equal(a1, a3)


class TestModularArithmetic:
    @given(
        h=st.integers(min_value=0, max_value=2**64 - 1),
        a=st.integers(min_value=1, max_value=MERSENNE_P - 1),
        b=st.integers(min_value=0, max_value=MERSENNE_P - 1),
    )
    @settings(max_examples=300, deadline=None)
    def test_perm_hash_matches_bigint(self, h, a, b):
        got = np_kernel._perm_hash(
            np.array([h], dtype=np.uint64),
            np.array([a], dtype=np.uint64),
            np.array([b], dtype=np.uint64),
        )
        assert int(got[0]) == (a * h + b) % MERSENNE_P

    def test_edge_inputs(self):
        p = MERSENNE_P
        for h in (0, 1, p - 1, p, p + 1, 2**64 - 1):
            for a in (1, 2, p - 1):
                for b in (0, 1, p - 1):
                    got = np_kernel._perm_hash(
                        np.array([h], dtype=np.uint64),
                        np.array([a], dtype=np.uint64),
                        np.array([b], dtype=np.uint64),
                    )
                    assert int(got[0]) == (a * h + b) % p


def random_texts(count, seed, vocab_size=400, min_len=1, max_len=40):
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(vocab_size)]
    return [
        " ".join(rng.choice(vocab) for _ in range(rng.randrange(min_len, max_len)))
        for _ in range(count)
    ]


@pytest.mark.skipif(cy_kernel is None, reason="compiled kernel not built")
class TestKernelParity:
    def test_identical_shingles_and_signatures(self):
        texts = random_texts(300, seed=11)
        a, b = make_permutations(256, seed=0)
        tokens = [tokenize(t) for t in texts]
        flat, offsets = minhash._hash_token_batch(tokens)
        h_np, o_np = np_kernel.shingle_hashes_batch(flat, offsets, 5)
        h_cy, o_cy = cy_kernel.shingle_hashes_batch(flat, offsets, 5)
        assert np.array_equal(h_np, h_cy)
        assert np.array_equal(o_np, o_cy)
        assert np.array_equal(
            np_kernel.signatures_batch(h_np, o_np, a, b),
            cy_kernel.signatures_batch(h_cy, o_cy, a, b),
        )

    def test_kernel_name_reports_selection(self):
        assert minhash.kernel_name() in ("python", "compiled")


class TestSignatures:
    def test_deterministic(self):
        s1 = minhash_signature("the quick brown fox jumps over the lazy dog", Cfg)
        s2 = minhash_signature("the quick brown fox jumps over the lazy dog", Cfg)
        assert s1 == s2

    def test_case_insensitive_tokens(self):
        assert minhash_signature("Hello World Again Now Here", Cfg) == minhash_signature(
            "hello world again now here", Cfg
        )

    def test_identical_texts_estimate_one(self):
        sig = minhash_signature("alpha beta gamma delta epsilon zeta", Cfg)
        assert estimated_jaccard(sig, sig) == 1.0

    def test_disjoint_vocab_estimates_zero(self):
        s1 = minhash_signature(" ".join(f"a{i}" for i in range(30)), Cfg)
        s2 = minhash_signature(" ".join(f"b{i}" for i in range(30)), Cfg)
        assert estimated_jaccard(s1, s2) == 0.0

    def test_short_text_hashes_whole_sequence(self):
        assert minhash_signature("a b", Cfg) == minhash_signature("a  b", Cfg)
        assert minhash_signature("a b", Cfg) != minhash_signature("b a", Cfg)

    def test_batch_matches_single(self):
        texts = random_texts(50, seed=3)
        a, b = make_permutations(Cfg.minhash_permutations, Cfg.seed)
        batch = signatures_for_texts(texts, Cfg.shingle_n, a, b)
        for text, row in zip(texts, batch):
            assert np.array_equal(minhash_signature(text, Cfg).values, row)

    def test_empty_text_rejected_with_position(self):
        a, b = make_permutations(Cfg.minhash_permutations, Cfg.seed)
        with pytest.raises(ValueError, match="position 1"):
            signatures_for_texts(["fine text", "   "], Cfg.shingle_n, a, b)

    def test_permutation_count_mismatch_rejected(self):
        class Bad(Cfg):
            minhash_permutations = 0

        with pytest.raises(ValueError):
            minhash_signature("some text", Bad)

    def test_signature_inequality(self):
        s1 = minhash_signature("one two three four five six", Cfg)
        s2 = minhash_signature("six five four three two one", Cfg)
        assert s1 != s2


class TestEstimateAgainstExactJaccard:
    def test_mutated_pairs_track_exact_jaccard(self):
        rng = random.Random(99)
        vocab = [f"t{i}" for i in range(2000)]
        errors = []
        a, b = make_permutations(256, seed=0)
        for _ in range(60):
            base = [rng.choice(vocab) for _ in range(rng.randrange(30, 120))]
            other = list(base)
            for _ in range(rng.randrange(0, len(base) // 3)):
                other[rng.randrange(len(other))] = rng.choice(vocab)
            t1, t2 = " ".join(base), " ".join(other)
            shingles1 = {tuple(tokenize(t1)[i : i + 5]) for i in range(len(base) - 4)}
            shingles2 = {tuple(tokenize(t2)[i : i + 5]) for i in range(len(other) - 4)}
            exact = len(shingles1 & shingles2) / len(shingles1 | shingles2)
            sigs = signatures_for_texts([t1, t2], 5, a, b)
            estimate = float(np.count_nonzero(sigs[0] == sigs[1])) / 256.0
            errors.append(abs(estimate - exact))
        assert sum(errors) / len(errors) <= 0.04
        assert max(errors) <= 0.15
