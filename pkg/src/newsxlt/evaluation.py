"""Zero-shot cross-lingual evaluation harness and related tooling.

The same behavior log is scored once per language, each time with that
language's embedding table over the same news ids, mimicking users who
read the candidate news in their own language. Reports aggregate to
per-language means plus the source-language row (ENG), the target-only
average (AVG), and their relative percentage difference.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .metrics import auc, mrr, ndcg_at_k, relative_delta
from .scoring import CoverageError, EmbeddingTable, load_embeddings, score_impression
from .types import Impression

log = logging.getLogger(__name__)

DEFAULT_NDCG_KS = (5, 10)


@dataclass(frozen=True)
class ImpressionMetrics:
    """Metric values for one scored impression."""

    auc: Optional[float]
    mrr: float
    ndcg: dict[int, float]
    skipped_auc: bool
    cold: bool

    @property
    def ndcg5(self) -> float:
        return self.ndcg[5]

    @property
    def ndcg10(self) -> float:
        return self.ndcg[10]


@dataclass
class EvalReport:
    """Per-language metric means plus ENG/AVG/%delta aggregates.

    per_language maps a language tag to {metric: (mean, count)}; count is
    the number of impressions the mean covers (smaller for AUC when
    single-class impressions were skipped). ``avg`` excludes the source
    language; ``delta_percent`` is 100*(avg-eng)/eng per metric, rounded to
    2 decimals half-away-from-zero.
    """

    source_language: str
    metric_names: tuple[str, ...]
    per_language: dict[str, dict[str, tuple[Optional[float], int]]]
    eng: dict[str, Optional[float]]
    avg: dict[str, Optional[float]]
    delta_percent: dict[str, Optional[float]]
    cold_count: int
    auc_skipped_count: int

    def to_json_dict(self) -> dict:
        return {
            "source_language": self.source_language,
            "metrics": list(self.metric_names),
            "per_language": {
                tag: {name: {"mean": mean, "count": count} for name, (mean, count) in stats.items()}
                for tag, stats in self.per_language.items()
            },
            "eng": self.eng,
            "avg": self.avg,
            "delta_percent": self.delta_percent,
            "cold_count": self.cold_count,
            "auc_skipped_count": self.auc_skipped_count,
        }

    def write_json(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(self.to_json_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["language", "metric", "mean", "count"])
            for tag, stats in self.per_language.items():
                for name in self.metric_names:
                    mean, count = stats[name]
                    writer.writerow([tag, name, "" if mean is None else repr(mean), count])


def split_by_day(impressions: Sequence[Impression]) -> tuple[list[Impression], list[Impression]]:
    """Split a behavior log into (earlier days, latest day), order preserved."""
    if not impressions:
        raise ValueError("cannot split an empty behavior log")
    days = {imp.day for imp in impressions}
    if len(days) < 2:
        raise ValueError("cannot split single-day data into train and validation")
    last_day = max(days)
    train = [imp for imp in impressions if imp.day != last_day]
    validation = [imp for imp in impressions if imp.day == last_day]
    return train, validation


def _impression_metrics(
    impression: Impression,
    table: EmbeddingTable,
    max_history: int,
    cold_policy: str,
    ndcg_ks: Sequence[int],
) -> ImpressionMetrics:
    scored = score_impression(impression, table, max_history=max_history, cold_policy=cold_policy)
    labels = [label for _, label in impression.candidates]
    scores = [candidate.score for candidate in scored.candidates]
    auc_value = auc(labels, scores)
    return ImpressionMetrics(
        auc=auc_value,
        mrr=mrr(labels, scores),
        ndcg={k: ndcg_at_k(labels, scores, k) for k in ndcg_ks},
        skipped_auc=auc_value is None,
        cold=scored.cold,
    )


def _validate_coverage(
    impressions: Sequence[Impression],
    tables: Mapping[str, EmbeddingTable],
    max_history: int,
) -> None:
    needed: list[str] = []
    seen: set[str] = set()
    for imp in impressions:
        for news_id in list(imp.history[-max_history:]) + [news_id for news_id, _ in imp.candidates]:
            if news_id not in seen:
                seen.add(news_id)
                needed.append(news_id)
    gaps: list[tuple[str, str]] = []
    for tag, table in tables.items():
        gaps.extend((tag, news_id) for news_id in table.missing_from(needed))
    if gaps:
        preview = ", ".join(f"{tag}:{news_id}" for tag, news_id in gaps[:20])
        suffix = "" if len(gaps) <= 20 else f" (+{len(gaps) - 20} more)"
        raise CoverageError(f"embedding coverage gaps: {preview}{suffix}", gaps)


def _mean_count(values: Sequence[Optional[float]]) -> tuple[Optional[float], int]:
    defined = [value for value in values if value is not None]
    if not defined:
        return None, 0
    return math.fsum(defined) / len(defined), len(defined)


def run_xlt_eval(
    impressions: Sequence[Impression],
    tables: Mapping[str, EmbeddingTable],
    source_language: str,
    max_history: int = 50,
    cold_policy: str = "zero",
    ndcg_ks: Sequence[int] = DEFAULT_NDCG_KS,
    threads: int = 1,
) -> EvalReport:
    """Score the behavior log once per language and aggregate a report.

    Coverage is validated for every language before any scoring; gaps
    raise CoverageError listing (language, id) pairs. Per-impression metric
    values are reduced with exact summation in impression order, so means
    do not depend on the worker count.
    """
    if not impressions:
        raise ValueError("empty behavior log")
    if source_language not in tables:
        raise ValueError(f"source language {source_language!r} has no embedding table")
    _validate_coverage(impressions, tables, max_history)

    metric_names = ["auc", "mrr"] + [f"ndcg@{k}" for k in ndcg_ks]
    per_language: dict[str, dict[str, tuple[Optional[float], int]]] = {}
    cold_count = 0
    auc_skipped = 0

    for tag, table in tables.items():

        def one(imp: Impression) -> ImpressionMetrics:
            return _impression_metrics(imp, table, max_history, cold_policy, ndcg_ks)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, impressions))
        else:
            results = [one(imp) for imp in impressions]

        stats: dict[str, tuple[Optional[float], int]] = {}
        stats["auc"] = _mean_count([metrics.auc for metrics in results])
        stats["mrr"] = _mean_count([metrics.mrr for metrics in results])
        for k in ndcg_ks:
            stats[f"ndcg@{k}"] = _mean_count([metrics.ndcg[k] for metrics in results])
        per_language[tag] = stats
        if tag == source_language:
            # the same impressions are scored for every language, so cold and
            # skip counts are per-run properties; record them once
            cold_count = sum(1 for metrics in results if metrics.cold)
            auc_skipped = sum(1 for metrics in results if metrics.skipped_auc)

    eng = {name: per_language[source_language][name][0] for name in metric_names}
    target_tags = [tag for tag in tables if tag != source_language]
    avg: dict[str, Optional[float]] = {}
    delta: dict[str, Optional[float]] = {}
    for name in metric_names:
        target_means = [per_language[tag][name][0] for tag in target_tags]
        if target_tags and all(value is not None for value in target_means):
            avg[name] = math.fsum(target_means) / len(target_means)  # type: ignore[arg-type]
        else:
            avg[name] = None
        if avg[name] is not None and eng[name] is not None and eng[name] != 0.0:
            delta[name] = relative_delta(eng[name], avg[name])  # type: ignore[arg-type]
        else:
            delta[name] = None

    log.info(
        "evaluated %d impressions across %d languages (source %s)",
        len(impressions),
        len(tables),
        source_language,
    )
    return EvalReport(
        source_language=source_language,
        metric_names=tuple(metric_names),
        per_language=per_language,
        eng=eng,
        avg=avg,
        delta_percent=delta,
        cold_count=cold_count,
        auc_skipped_count=auc_skipped,
    )


@dataclass
class CheckpointSelection:
    best_id: str
    mean_ndcg10: dict[str, float]
    per_language_ndcg10: dict[str, dict[str, Optional[float]]] = field(default_factory=dict)


def checkpoint_select(
    checkpoints: Sequence[tuple[str, Mapping[str, EmbeddingTable]]],
    impressions: Sequence[Impression],
    source_language: str,
    max_history: int = 50,
    cold_policy: str = "zero",
    threads: int = 1,
) -> CheckpointSelection:
    """Pick the checkpoint with the best mean nDCG@10 over ALL languages.

    The mean includes the source language. Ties go to the earliest
    checkpoint in input order; coverage errors name the checkpoint.
    """
    if not checkpoints:
        raise ValueError("no checkpoints given")
    means: dict[str, float] = {}
    per_language: dict[str, dict[str, Optional[float]]] = {}
    best_id: Optional[str] = None
    for checkpoint_id, tables in checkpoints:
        try:
            report = run_xlt_eval(
                impressions,
                tables,
                source_language,
                max_history=max_history,
                cold_policy=cold_policy,
                threads=threads,
            )
        except CoverageError as exc:
            raise CoverageError(f"checkpoint {checkpoint_id}: {exc.message}", exc.missing) from exc
        lang_means = {tag: stats["ndcg@10"][0] for tag, stats in report.per_language.items()}
        defined = [value for value in lang_means.values() if value is not None]
        if not defined:
            raise ValueError(f"checkpoint {checkpoint_id}: no defined ndcg@10 means")
        means[checkpoint_id] = math.fsum(defined) / len(defined)
        per_language[checkpoint_id] = lang_means
        if best_id is None or means[checkpoint_id] > means[best_id]:
            best_id = checkpoint_id
    assert best_id is not None
    return CheckpointSelection(best_id=best_id, mean_ndcg10=means, per_language_ndcg10=per_language)


def load_checkpoint_tables(
    checkpoint_dir: Union[str, Path], languages: Sequence[str]
) -> dict[str, EmbeddingTable]:
    """Load one embedding table per language from a checkpoint directory.

    Files are named by language tag with extension .nbem or .tsv,
    e.g. ``eng_Latn.nbem``.
    """
    checkpoint_dir = Path(checkpoint_dir)
    tables: dict[str, EmbeddingTable] = {}
    for tag in languages:
        candidates = [checkpoint_dir / f"{tag}.nbem", checkpoint_dir / f"{tag}.tsv"]
        existing = [path for path in candidates if path.is_file()]
        if not existing:
            raise FileNotFoundError(
                f"checkpoint {checkpoint_dir.name}: no embedding file for {tag} "
                f"(expected {candidates[0].name} or {candidates[1].name})"
            )
        tables[tag] = load_embeddings(existing[0])
    return tables


def fewshot_export(
    train_impressions: Sequence[Impression],
    n: int,
    seed: int,
    negatives_per_positive: Optional[int] = None,
) -> tuple[list[Impression], Optional[list[dict]]]:
    """Uniformly subsample n impressions without replacement, order kept.

    With negatives_per_positive set, also builds per-positive training
    tuples: each positive candidate paired with up to that many uniformly
    drawn negatives from the same impression.
    """
    population = len(train_impressions)
    if n > population:
        raise ValueError(f"cannot sample {n} impressions from a population of {population}")
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = random.Random(seed)
    chosen = set(rng.sample(range(population), n))
    subset = [imp for index, imp in enumerate(train_impressions) if index in chosen]
    if negatives_per_positive is None:
        return subset, None
    if negatives_per_positive < 0:
        raise ValueError("negatives_per_positive must be non-negative")
    tuples: list[dict] = []
    for imp in subset:
        negatives = [news_id for news_id, label in imp.candidates if label == 0]
        for news_id, label in imp.candidates:
            if label != 1:
                continue
            drawn = rng.sample(negatives, min(negatives_per_positive, len(negatives)))
            tuples.append(
                {
                    "impression_id": imp.impression_id,
                    "positive": news_id,
                    "negatives": drawn,
                }
            )
    return subset, tuples
