"""Temperature-smoothed sampling and seq2seq training example generation.

Languages are drawn with probability proportional to count^alpha (alpha
0.3 by default) after excluding languages below min_count, then a text is
drawn uniformly within the language. Examples come in two objectives:
token-deletion denoising (dae) and translation (mt), combined by four
scheduling modes. Everything is driven by one seeded RNG, so generation
is fully deterministic.
"""

from __future__ import annotations

import logging
import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Hashable, Mapping, Optional, Sequence, TypeVar

from .types import Corpus, LanguageKey, NewsText, ParallelPair, Seq2SeqExample

log = logging.getLogger(__name__)

K = TypeVar("K", bound=Hashable)

MODES = ("dae", "mt", "dae_plus_mt", "dae_then_mt")


@dataclass
class SamplerConfig:
    n_examples: int
    mode: str = "dae"
    alpha: float = 0.3
    min_count: int = 100
    deletion_ratio: float = 0.6
    seed: int = 0
    phase_split: float = 0.5
    batch_size: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_examples < 0:
            raise ValueError("n_examples must be non-negative")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 < self.deletion_ratio < 1.0:
            raise ValueError(f"deletion_ratio must be in (0, 1), got {self.deletion_ratio}")
        if self.min_count < 1:
            raise ValueError("min_count must be at least 1")
        if not 0.0 <= self.phase_split <= 1.0:
            raise ValueError(f"phase_split must be in [0, 1], got {self.phase_split}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass(frozen=True)
class LanguageDistribution:
    """Sampling distribution over language keys (or key pairs)."""

    probabilities: dict
    counts: dict = field(compare=False)

    def __post_init__(self) -> None:
        total = math.fsum(self.probabilities.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, expected 1")

    def keys(self):
        return self.probabilities.keys()


def language_weights(counts: Mapping[K, int], alpha: float = 0.3, min_count: int = 100) -> LanguageDistribution:
    """Smoothed distribution p(L) = count^alpha / sum over eligible keys.

    Keys with fewer than min_count texts are excluded entirely. Raises if
    nothing survives the cutoff.
    """
    eligible = {key: count for key, count in counts.items() if count >= min_count}
    if not eligible:
        raise ValueError(f"no eligible languages: every count is below min_count={min_count}")
    powered = {key: float(count) ** alpha for key, count in eligible.items()}
    total = math.fsum(powered.values())
    return LanguageDistribution(
        probabilities={key: value / total for key, value in powered.items()},
        counts=eligible,
    )


class _KeySampler:
    """Inverse-CDF draws over a LanguageDistribution with a fixed key order."""

    def __init__(self, dist: LanguageDistribution) -> None:
        self._keys = list(dist.probabilities)
        self._cdf = list(accumulate(dist.probabilities[key] for key in self._keys))

    def draw(self, rng: random.Random):
        return self._keys[min(bisect_right(self._cdf, rng.random()), len(self._keys) - 1)]


def sample_texts(corpus: Corpus, dist: LanguageDistribution, n: int, seed: int) -> list[NewsText]:
    """Draw n texts with replacement: key by dist, then uniform within key."""
    groups = corpus.by_key()
    missing = [key for key in dist.keys() if key not in groups]
    if missing:
        raise ValueError(f"distribution keys missing from corpus: {[k.tag for k in missing]}")
    rng = random.Random(seed)
    key_sampler = _KeySampler(dist)
    out = []
    for _ in range(n):
        group = groups[key_sampler.draw(rng)]
        out.append(group[rng.randrange(len(group))])
    return out


def corrupt_delete(tokens: Sequence[str], ratio: float, rng: random.Random) -> list[str]:
    """Delete floor(ratio * l) tokens at uniform positions, keeping >= 1.

    Survivors preserve their relative order; the deletion count is capped
    at l - 1 so single-token inputs pass through unchanged.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"deletion ratio must be in (0, 1), got {ratio}")
    l = len(tokens)
    if l == 0:
        raise ValueError("cannot corrupt an empty token list")
    d = min(math.floor(ratio * l), l - 1)
    doomed = set(rng.sample(range(l), d))
    return [token for position, token in enumerate(tokens) if position not in doomed]


def make_dae_example(text: NewsText, ratio: float, rng: random.Random) -> Seq2SeqExample:
    """Denoising example: input is the corrupted text, target the original."""
    survivors = corrupt_delete(text.text.split(), ratio, rng)
    return Seq2SeqExample(
        input=" ".join(survivors),
        target=text.text,
        objective="dae",
        lang_or_pair=text.key,
    )


def make_mt_example(pair: ParallelPair, direction: str = "forward") -> Seq2SeqExample:
    """Translation example; the source side acts as the target's corruption.

    direction "forward" maps src -> tgt, "reverse" swaps the sides. No
    corruption is applied to either text.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    source, target = (pair.src, pair.tgt) if direction == "forward" else (pair.tgt, pair.src)
    return Seq2SeqExample(
        input=source.text,
        target=target.text,
        objective="mt",
        lang_or_pair=(source.key, target.key),
    )


def _pair_groups(
    parallel: Sequence[ParallelPair],
) -> dict[tuple[LanguageKey, LanguageKey], list[ParallelPair]]:
    groups: dict[tuple[LanguageKey, LanguageKey], list[ParallelPair]] = {}
    for pair in parallel:
        groups.setdefault(pair.pair_key, []).append(pair)
    return groups


class _PairDraw:
    def __init__(self, parallel: Sequence[ParallelPair], config: SamplerConfig) -> None:
        self.groups = _pair_groups(parallel)
        dist = language_weights(
            {key: len(group) for key, group in self.groups.items()},
            config.alpha,
            config.min_count,
        )
        self.sampler = _KeySampler(dist)

    def draw(self, rng: random.Random) -> ParallelPair:
        group = self.groups[self.sampler.draw(rng)]
        return group[rng.randrange(len(group))]


class _MonoDraw:
    def __init__(self, mono: Corpus, config: SamplerConfig) -> None:
        self.groups = mono.by_key()
        dist = language_weights(mono.per_key_counts, config.alpha, config.min_count)
        self.sampler = _KeySampler(dist)

    def draw(self, rng: random.Random) -> NewsText:
        group = self.groups[self.sampler.draw(rng)]
        return group[rng.randrange(len(group))]


def schedule_examples(
    mono_corpus: Optional[Corpus],
    parallel_corpus: Optional[Sequence[ParallelPair]],
    config: SamplerConfig,
) -> list[Seq2SeqExample]:
    """Generate exactly config.n_examples examples for the configured mode.

    Modes:
      dae          all denoising examples from the mono corpus
      mt           all translation examples from the parallel corpus
      dae_plus_mt  parallel corpus only; a fair coin per batch picks the
                   objective, and a dae batch corrupts BOTH sides of each
                   drawn pair independently
      dae_then_mt  floor(phase_split * n) dae examples from mono, then mt
                   examples from parallel
    """
    rng = random.Random(config.seed)
    n = config.n_examples
    out: list[Seq2SeqExample] = []

    def need_mono() -> _MonoDraw:
        if mono_corpus is None or len(mono_corpus) == 0:
            raise ValueError(f"mode {config.mode!r} requires a non-empty mono corpus")
        return _MonoDraw(mono_corpus, config)

    def need_parallel() -> _PairDraw:
        if not parallel_corpus:
            raise ValueError(f"mode {config.mode!r} requires a non-empty parallel corpus")
        return _PairDraw(parallel_corpus, config)

    if config.mode == "dae":
        draw = need_mono()
        for _ in range(n):
            out.append(make_dae_example(draw.draw(rng), config.deletion_ratio, rng))
    elif config.mode == "mt":
        draw = need_parallel()
        for _ in range(n):
            out.append(make_mt_example(draw.draw(rng)))
    elif config.mode == "dae_plus_mt":
        draw = need_parallel()
        while len(out) < n:
            if rng.random() < 0.5:
                for _ in range(config.batch_size):
                    pair = draw.draw(rng)
                    for side in (pair.src, pair.tgt):
                        out.append(make_dae_example(side, config.deletion_ratio, rng))
            else:
                for _ in range(config.batch_size):
                    out.append(make_mt_example(draw.draw(rng)))
        del out[n:]
    else:  # dae_then_mt
        n_phase1 = math.floor(config.phase_split * n)
        mono_draw = need_mono() if n_phase1 else None
        parallel_draw = need_parallel() if n - n_phase1 else None
        for _ in range(n_phase1):
            out.append(make_dae_example(mono_draw.draw(rng), config.deletion_ratio, rng))
        for _ in range(n - n_phase1):
            out.append(make_mt_example(parallel_draw.draw(rng)))

    log.info("generated %d %s examples", len(out), config.mode)
    return out
