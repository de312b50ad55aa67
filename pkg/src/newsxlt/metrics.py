"""Ranking metrics for labeled impressions: AUC, MRR, nDCG@k.

Conventions: AUC is the Mann-Whitney statistic with average ranks for
ties, undefined (None) when an impression has only one class. MRR averages
reciprocal ranks over ALL positives. nDCG uses binary linear gain
rel/log2(i+1). Ranking ties always resolve by input order (stable sort).
"""

from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Sequence


def _check_lengths(labels: Sequence[int], scores: Sequence[float]) -> None:
    if len(labels) != len(scores):
        raise ValueError(f"labels and scores differ in length: {len(labels)} vs {len(scores)}")
    if not labels:
        raise ValueError("empty impression")
    for label in labels:
        if label not in (0, 1):
            raise ValueError(f"labels must be binary, got {label!r}")


def auc(labels: Sequence[int], scores: Sequence[float]) -> Optional[float]:
    """Probability a positive outscores a negative, ties counting half.

    Computed from average ranks (Mann-Whitney). Returns None when the
    impression has no positive or no negative; callers count such skips.
    """
    _check_lengths(labels, scores)
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        average_rank = (i + j + 2) / 2.0  # 1-based average over the tie run
        for position in range(i, j + 1):
            ranks[order[position]] = average_rank
        i = j + 1
    rank_sum = math.fsum(ranks[i] for i in range(len(labels)) if labels[i] == 1)
    u_statistic = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u_statistic / (n_pos * n_neg)


def _descending_order(scores: Sequence[float]) -> list[int]:
    # stable: equal scores keep input order
    return sorted(range(len(scores)), key=lambda i: -scores[i])


def mrr(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Mean reciprocal rank over all positives of one impression."""
    _check_lengths(labels, scores)
    if not any(labels):
        raise ValueError("mrr undefined: no positive candidate")
    order = _descending_order(scores)
    reciprocal = [
        1.0 / rank for rank, i in enumerate(order, start=1) if labels[i] == 1
    ]
    return math.fsum(reciprocal) / len(reciprocal)


def ndcg_at_k(labels: Sequence[int], scores: Sequence[float], k: int) -> float:
    """Normalized DCG at cutoff k with binary linear gain."""
    _check_lengths(labels, scores)
    if k < 1:
        raise ValueError("k must be at least 1")
    n_pos = sum(labels)
    if n_pos == 0:
        raise ValueError("ndcg undefined: no positive candidate")
    order = _descending_order(scores)
    cutoff = min(k, len(labels))
    dcg = math.fsum(labels[order[i]] / math.log2(i + 2) for i in range(cutoff))
    ideal = math.fsum(1.0 / math.log2(i + 2) for i in range(min(cutoff, n_pos)))
    return dcg / ideal


def relative_delta(eng_value: float, avg_value: float) -> float:
    """100 * (avg - eng) / eng, rounded half-away-from-zero to 2 decimals."""
    if eng_value == 0:
        raise ValueError("relative delta undefined for eng_value 0")
    raw = 100.0 * (avg_value - eng_value) / eng_value
    return float(Decimal(repr(raw)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))
