"""Multilingual corpus cleaning: dedup, script/LID/length filters, stats.

Stage order inside one language-key shard: exact_dedup -> script_filter ->
lid_filter -> length_filter (per source) -> near_dedup. Every stage is a
pure filter (output is a subsequence of its input), so the whole pipeline
is deterministic and shards can run on any number of threads with
bit-identical results.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Mapping, Optional, Sequence, TypeVar

import numpy as np
import regex

from .minhash import make_permutations, signatures_for_texts
from .types import Corpus, LanguageKey, NewsText, ParallelPair

log = logging.getLogger(__name__)

T = TypeVar("T")

STAGES = (
    "input",
    "after_exact_dedup",
    "after_script_filter",
    "after_lid_filter",
    "after_length_filter",
    "after_near_dedup",
)

# ISO 15924 codes that name script groupings rather than single Unicode
# Script property values; mapped to the Unicode scripts they cover.
_SCRIPT_ALIASES: dict[str, tuple[str, ...]] = {
    "Hans": ("Hani",),
    "Hant": ("Hani",),
    "Jpan": ("Hani", "Hira", "Kana"),
    "Kore": ("Hang", "Hani"),
    "Hrkt": ("Hira", "Kana"),
}

# letters that carry script evidence: category L minus Common/Inherited
_LETTER_RE = regex.compile(r"[\p{L}--\p{sc=Zyyy}--\p{sc=Zinh}]", regex.V1)


@dataclass
class PipelineConfig:
    """Tuning knobs for the cleaning pipeline.

    k_percent maps a source tag to its length-filter percentage; sources not
    listed fall back to k_percent_default. LSH geometry must factor the
    permutation count exactly.
    """

    k_percent: dict[str, float] = field(default_factory=lambda: {"wikinews": 15.0})
    k_percent_default: float = 3.0
    minhash_permutations: int = 256
    shingle_n: int = 5
    near_dup_threshold: float = 0.9
    lsh_bands: int = 16
    lsh_rows: int = 16
    min_letters: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lsh_bands * self.lsh_rows != self.minhash_permutations:
            raise ValueError(
                f"lsh_bands * lsh_rows must equal minhash_permutations "
                f"({self.lsh_bands} * {self.lsh_rows} != {self.minhash_permutations})"
            )
        if not 0.0 <= self.near_dup_threshold <= 1.0:
            raise ValueError(f"near_dup_threshold must be in [0, 1], got {self.near_dup_threshold}")
        for source, k in {**self.k_percent, None: self.k_percent_default}.items():
            if not 0.0 <= k < 100.0:
                raise ValueError(f"k_percent must be in [0, 100), got {k} for {source or 'default'}")
        if self.shingle_n < 1:
            raise ValueError("shingle_n must be at least 1")
        if self.min_letters < 0:
            raise ValueError("min_letters must be non-negative")

    def k_for(self, source: str) -> float:
        return self.k_percent.get(source, self.k_percent_default)


@dataclass
class PipelineStats:
    """Per-stage survivor counts, keyed by language tag and source."""

    counts: dict[str, dict[str, dict[str, int]]] = field(
        default_factory=lambda: {stage: {} for stage in STAGES}
    )
    lid_unlabeled_passed: int = 0
    lid_unknown_label_ids: int = 0

    def record(self, stage: str, key_tag: str, per_source: Mapping[str, int]) -> None:
        bucket = self.counts[stage].setdefault(key_tag, {})
        for source, count in per_source.items():
            bucket[source] = bucket.get(source, 0) + count

    def total(self, stage: str) -> int:
        return sum(count for sources in self.counts[stage].values() for count in sources.values())

    def to_json_dict(self) -> dict:
        return {
            "stages": {
                stage: {
                    tag: dict(sorted(sources.items()))
                    for tag, sources in sorted(self.counts[stage].items())
                }
                for stage in STAGES
            },
            "totals": {stage: self.total(stage) for stage in STAGES},
            "lid": {
                "unlabeled_passed": self.lid_unlabeled_passed,
                "unknown_label_ids": self.lid_unknown_label_ids,
            },
        }


def _count_by_source(items: Iterable[NewsText]) -> dict[str, int]:
    out: dict[str, int] = {}
    for item in items:
        out[item.source] = out.get(item.source, 0) + 1
    return out


def exact_dedup(items: Sequence[NewsText]) -> list[NewsText]:
    """Keep the first occurrence of each distinct normalized text."""
    seen: set[str] = set()
    kept = []
    for item in items:
        if item.text not in seen:
            seen.add(item.text)
            kept.append(item)
    return kept


@lru_cache(maxsize=None)
def _script_pattern(script: str):
    classes = "".join(rf"\p{{sc={name}}}" for name in _SCRIPT_ALIASES.get(script, (script,)))
    try:
        return regex.compile(rf"[[{classes}]&&\p{{L}}]", regex.V1)
    except regex.error as exc:
        raise ValueError(f"script code {script!r} has no Unicode script mapping") from exc


def dominant_script_matches(text: str, script: str, min_letters: int) -> bool:
    """True when a strict majority of script-bearing letters carry ``script``.

    Letters of the Common and Inherited scripts are ignored; a text with
    fewer than min_letters script-bearing letters never matches.
    """
    total = len(_LETTER_RE.findall(text))
    if total < min_letters or total == 0:
        return False
    matching = len(_script_pattern(script).findall(text))
    return 2 * matching > total


def script_filter(items: Sequence[NewsText], key: LanguageKey, min_letters: int = 1) -> list[NewsText]:
    """Drop texts whose dominant Unicode script differs from key.script."""
    return [item for item in items if dominant_script_matches(item.text, key.script, min_letters)]


def lid_filter(
    items: Sequence[NewsText], labels: Optional[Mapping[str, str]]
) -> tuple[list[NewsText], int]:
    """Drop items whose external language prediction contradicts their key.

    Returns (kept, unlabeled_count). With no labels at all, everything
    passes and every item counts as unlabeled.
    """
    if labels is None:
        return list(items), len(items)
    kept = []
    unlabeled = 0
    for item in items:
        predicted = labels.get(item.id)
        if predicted is None:
            unlabeled += 1
            kept.append(item)
        elif predicted == item.key.lang:
            kept.append(item)
    return kept, unlabeled


def length_filter(items: Sequence[T], k_percent: float, *, char_len_of=None, id_of=None) -> list[T]:
    """Remove the floor(K/100 * N) items with smallest (char_len, id).

    Items must already be scoped to one language key and one source; ties
    at equal length break by ascending id.
    """
    if not 0.0 <= k_percent < 100.0:
        raise ValueError(f"k_percent must be in [0, 100), got {k_percent}")
    char_len_of = char_len_of or (lambda item: item.char_len)
    id_of = id_of or (lambda item: item.id)
    n_removed = math.floor(k_percent / 100.0 * len(items))
    if n_removed == 0:
        return list(items)
    by_length = sorted(items, key=lambda item: (char_len_of(item), id_of(item)))
    removed = {id_of(item) for item in by_length[:n_removed]}
    return [item for item in items if id_of(item) not in removed]


class _UnionFind:
    def __init__(self, size: int) -> None:
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # anchor on the smaller index so group representatives are stable
            if rx > ry:
                rx, ry = ry, rx
            self.parent[ry] = rx


def near_dedup(
    items: Sequence[T],
    config: PipelineConfig,
    *,
    text_of: Callable[[T], str] = None,  # type: ignore[assignment]
) -> list[T]:
    """Drop near-duplicates via MinHash/LSH, keeping first occurrences.

    LSH banding only proposes candidate pairs; the duplicate predicate is
    the signature-estimated Jaccard reaching config.near_dup_threshold.
    Duplicate groups are merged with union-find and each group keeps its
    earliest member in input order. ``text_of`` selects the dedup key text
    (defaults to item.text; parallel corpora pass the source side).
    """
    if text_of is None:
        text_of = lambda item: item.text  # noqa: E731
    n = len(items)
    if n < 2:
        return list(items)
    a, b = make_permutations(config.minhash_permutations, config.seed)
    sigs = signatures_for_texts([text_of(item) for item in items], config.shingle_n, a, b)

    uf = _UnionFind(n)
    # identical signatures are duplicates at any threshold <= 1; collapsing
    # them first keeps LSH buckets small on exact-duplicate-heavy input
    first_with_sig: dict[bytes, int] = {}
    reps: list[int] = []
    for i in range(n):
        sig_key = sigs[i].tobytes()
        earlier = first_with_sig.get(sig_key)
        if earlier is None:
            first_with_sig[sig_key] = i
            reps.append(i)
        else:
            uf.union(earlier, i)

    row_bytes = config.lsh_rows * 8
    buckets: dict[tuple[int, bytes], list[int]] = {}
    for rep in reps:
        raw = sigs[rep].tobytes()
        for band in range(config.lsh_bands):
            buckets.setdefault((band, raw[band * row_bytes : (band + 1) * row_bytes]), []).append(rep)

    m = config.minhash_permutations
    checked: set[tuple[int, int]] = set()
    for members in buckets.values():
        if len(members) < 2:
            continue
        for x, y in combinations(members, 2):
            pair = (x, y) if x < y else (y, x)
            if pair in checked:
                continue
            checked.add(pair)
            estimate = np.count_nonzero(sigs[x] == sigs[y]) / m
            if estimate >= config.near_dup_threshold:
                uf.union(x, y)

    keeper: dict[int, int] = {}
    for i in range(n):
        root = uf.find(i)
        if root not in keeper:
            keeper[root] = i
    kept_indices = set(keeper.values())
    return [item for i, item in enumerate(items) if i in kept_indices]


def _process_key_shard(
    key: LanguageKey,
    items: list[NewsText],
    config: PipelineConfig,
    labels: Optional[Mapping[str, str]],
) -> tuple[list[list[NewsText]], int]:
    """Run all stages for one language key; returns per-stage survivors."""
    s1 = exact_dedup(items)
    s2 = script_filter(s1, key, config.min_letters)
    s3, unlabeled = lid_filter(s2, labels)
    removed_ids: set[str] = set()
    by_source: dict[str, list[NewsText]] = {}
    for item in s3:
        by_source.setdefault(item.source, []).append(item)
    for source, group in by_source.items():
        survivors = {item.id for item in length_filter(group, config.k_for(source))}
        removed_ids.update(item.id for item in group if item.id not in survivors)
    s4 = [item for item in s3 if item.id not in removed_ids]
    s5 = near_dedup(s4, config)
    return [items, s1, s2, s3, s4, s5], unlabeled


def run_pipeline(
    corpus: Corpus,
    config: PipelineConfig,
    lid_labels: Optional[Mapping[str, str]] = None,
    threads: int = 1,
) -> tuple[Corpus, PipelineStats]:
    """Clean a corpus shard-by-shard and report per-stage counts.

    Shards (one per language key) are independent; with threads > 1 they
    run on a thread pool and results are reduced in key order, so output
    and stats never depend on the worker count.
    """
    stats = PipelineStats()
    groups = corpus.by_key()
    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                key: pool.submit(_process_key_shard, key, items, config, lid_labels)
                for key, items in groups.items()
            }
            results = {key: future.result() for key, future in futures.items()}
    else:
        results = {
            key: _process_key_shard(key, items, config, lid_labels) for key, items in groups.items()
        }

    survivors: set[str] = set()
    for key in groups:
        stage_lists, unlabeled = results[key]
        for stage, stage_items in zip(STAGES, stage_lists):
            stats.record(stage, key.tag, _count_by_source(stage_items))
        stats.lid_unlabeled_passed += unlabeled
        survivors.update(item.id for item in stage_lists[-1])

    if lid_labels is not None:
        known_ids = {item.id for item in corpus}
        stats.lid_unknown_label_ids = sum(1 for labeled_id in lid_labels if labeled_id not in known_ids)

    cleaned = Corpus(tuple(item for item in corpus if item.id in survivors))
    log.info("pipeline kept %d of %d texts across %d keys", len(cleaned), len(corpus), len(groups))
    return cleaned, stats


def _pair_tag(pair_key: tuple[LanguageKey, LanguageKey]) -> str:
    return f"{pair_key[0].tag}->{pair_key[1].tag}"


def _process_pair_shard(
    pair_key: tuple[LanguageKey, LanguageKey],
    indexed: list[tuple[int, ParallelPair]],
    config: PipelineConfig,
    labels: Optional[Mapping[str, str]],
) -> tuple[list[list[tuple[int, ParallelPair]]], int]:
    src_key, tgt_key = pair_key
    s1: list[tuple[int, ParallelPair]] = []
    seen: set[tuple[str, str]] = set()
    for idx, pair in indexed:
        text_pair = (pair.src.text, pair.tgt.text)
        if text_pair not in seen:
            seen.add(text_pair)
            s1.append((idx, pair))
    s2 = [
        (idx, pair)
        for idx, pair in s1
        if dominant_script_matches(pair.src.text, src_key.script, config.min_letters)
        and dominant_script_matches(pair.tgt.text, tgt_key.script, config.min_letters)
    ]
    unlabeled = 0
    if labels is None:
        s3 = list(s2)
        unlabeled = len(s2)
    else:
        s3 = []
        for idx, pair in s2:
            verdicts = []
            for side in (pair.src, pair.tgt):
                predicted = labels.get(side.id)
                if predicted is None:
                    unlabeled += 1
                    verdicts.append(True)
                else:
                    verdicts.append(predicted == side.key.lang)
            if all(verdicts):
                s3.append((idx, pair))
    by_source: dict[str, list[tuple[int, ParallelPair]]] = {}
    for idx, pair in s3:
        by_source.setdefault(pair.source, []).append((idx, pair))
    removed: set[int] = set()
    for source, group in by_source.items():
        kept = length_filter(
            group,
            config.k_for(source),
            char_len_of=lambda entry: entry[1].src.char_len,
            id_of=lambda entry: entry[0],
        )
        kept_ids = {idx for idx, _ in kept}
        removed.update(idx for idx, _ in group if idx not in kept_ids)
    s4 = [(idx, pair) for idx, pair in s3 if idx not in removed]
    s5 = near_dedup(s4, config, text_of=lambda entry: entry[1].src.text)
    return [list(indexed), s1, s2, s3, s4, s5], unlabeled


def run_parallel_pipeline(
    pairs: Sequence[ParallelPair],
    config: PipelineConfig,
    lid_labels: Optional[Mapping[str, str]] = None,
    threads: int = 1,
) -> tuple[list[ParallelPair], PipelineStats]:
    """Clean a parallel corpus; near-dedup keys on the source-side text.

    Stages mirror run_pipeline per (source key, target key) group: exact
    dedup on the text pair, script filter on both sides, LID filter on both
    sides, length filter on source-side length per source, near-dedup on
    source-side text.
    """
    stats = PipelineStats()
    groups: dict[tuple[LanguageKey, LanguageKey], list[tuple[int, ParallelPair]]] = {}
    for idx, pair in enumerate(pairs):
        groups.setdefault(pair.pair_key, []).append((idx, pair))

    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                pair_key: pool.submit(_process_pair_shard, pair_key, indexed, config, lid_labels)
                for pair_key, indexed in groups.items()
            }
            results = {pair_key: future.result() for pair_key, future in futures.items()}
    else:
        results = {
            pair_key: _process_pair_shard(pair_key, indexed, config, lid_labels)
            for pair_key, indexed in groups.items()
        }

    survivors: set[int] = set()
    for pair_key in groups:
        stage_lists, unlabeled = results[pair_key]
        tag = _pair_tag(pair_key)
        for stage, stage_items in zip(STAGES, stage_lists):
            stats.record(stage, tag, _count_by_source(pair for _, pair in stage_items))
        stats.lid_unlabeled_passed += unlabeled
        survivors.update(idx for idx, _ in stage_lists[-1])

    if lid_labels is not None:
        side_ids = {side.id for pair in pairs for side in (pair.src, pair.tgt)}
        stats.lid_unknown_label_ids = sum(1 for labeled_id in lid_labels if labeled_id not in side_ids)

    cleaned = [pair for idx, pair in enumerate(pairs) if idx in survivors]
    log.info("parallel pipeline kept %d of %d pairs", len(cleaned), len(pairs))
    return cleaned, stats


def parse_lid_labels(source) -> dict[str, str]:
    """Read a TSV of ``id<TAB>iso639_3`` external language predictions."""
    from .io import FormatError, _open_read

    labels: dict[str, str] = {}
    with _open_read(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise FormatError(f"line {lineno}: expected 'id<TAB>lang'")
            labels[parts[0]] = parts[1]
    return labels
