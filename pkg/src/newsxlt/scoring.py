"""Embedding storage and the training-free late-fusion recommender.

A candidate's score for a user is the mean of dot products between the
candidate embedding and the embeddings of the user's clicked news (capped
at the most recent max_history clicks). Embeddings are inputs, stored as
float32 in either a binary format or TSV; no encoding happens here.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence, Union

import numpy as np
import requests

from .types import Impression

log = logging.getLogger(__name__)

MAGIC = b"NBEM"
FORMAT_VERSION = 1


class CoverageError(KeyError):
    """An id required for scoring is missing from an embedding table."""

    def __init__(self, message: str, missing: Sequence[tuple[str, str]] = ()) -> None:
        super().__init__(message)
        self.message = message
        # (context, id) pairs, e.g. (language tag, news id)
        self.missing = tuple(missing)

    def __str__(self) -> str:
        return self.message


class ColdUserError(ValueError):
    """An impression with empty history under cold_policy='error'."""


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable map from news id to a float32 vector of fixed dimension."""

    dim: int
    ids: tuple[str, ...]
    matrix: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.matrix.shape != (len(self.ids), self.dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match {len(self.ids)} ids x dim {self.dim}"
            )
        if self.matrix.dtype != np.float32:
            raise ValueError(f"matrix must be float32, got {self.matrix.dtype}")
        if len(set(self.ids)) != len(self.ids):
            seen: set[str] = set()
            for news_id in self.ids:
                if news_id in seen:
                    raise ValueError(f"duplicate id {news_id!r} in embedding table")
                seen.add(news_id)
        if self.matrix.size and not np.isfinite(self.matrix).all():
            bad = int(np.argwhere(~np.isfinite(self.matrix).all(axis=1))[0][0])
            raise ValueError(f"non-finite embedding for id {self.ids[bad]!r}")
        object.__setattr__(self, "_index", {news_id: row for row, news_id in enumerate(self.ids)})

    @classmethod
    def from_entries(
        cls,
        entries: Mapping[str, Sequence[float]] | Iterable[tuple[str, Sequence[float]]],
        normalized: bool = False,
    ) -> "EmbeddingTable":
        pairs = list(entries.items()) if isinstance(entries, Mapping) else list(entries)
        if not pairs:
            raise ValueError("embedding table must not be empty")
        ids = tuple(news_id for news_id, _ in pairs)
        first = np.asarray(pairs[0][1], dtype=np.float32)
        matrix = np.empty((len(ids), first.shape[0]), dtype=np.float32)
        for row, (news_id, raw) in enumerate(pairs):
            vec = np.asarray(raw, dtype=np.float32)
            if vec.shape != first.shape:
                raise ValueError(
                    f"dim mismatch for id {news_id!r}: expected {first.shape[0]}, got {vec.shape[0]}"
                )
            matrix[row] = vec
        return cls(dim=int(first.shape[0]), ids=ids, matrix=matrix, normalized=normalized)

    def __contains__(self, news_id: str) -> bool:
        return news_id in self._index  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.ids)

    def vector(self, news_id: str) -> np.ndarray:
        row = self._index.get(news_id)  # type: ignore[attr-defined]
        if row is None:
            raise CoverageError(f"missing embedding for id {news_id!r}", [("", news_id)])
        return self.matrix[row]

    def missing_from(self, needed: Iterable[str]) -> list[str]:
        index = self._index  # type: ignore[attr-defined]
        return [news_id for news_id in needed if news_id not in index]


def l2_normalize(table: EmbeddingTable) -> EmbeddingTable:
    """Scale every vector to unit L2 norm; errors on zero vectors."""
    norms = np.linalg.norm(table.matrix.astype(np.float64), axis=1)
    zero_rows = np.nonzero(norms == 0.0)[0]
    if zero_rows.size:
        raise ValueError(f"cannot normalize zero vector for id {table.ids[int(zero_rows[0])]!r}")
    scaled = (table.matrix.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingTable(dim=table.dim, ids=table.ids, matrix=scaled, normalized=True)


def write_embeddings_binary(table: EmbeddingTable, path: Union[str, Path]) -> int:
    """Write the binary format; returns bytes written."""
    written = 0
    with open(path, "wb") as handle:
        header = MAGIC + struct.pack("<BIQ", FORMAT_VERSION, table.dim, len(table.ids))
        written += handle.write(header)
        for row, news_id in enumerate(table.ids):
            raw_id = news_id.encode("utf-8")
            if len(raw_id) > 0xFFFF:
                raise ValueError(f"id too long to serialize: {news_id[:32]!r}...")
            written += handle.write(struct.pack("<H", len(raw_id)))
            written += handle.write(raw_id)
            written += handle.write(table.matrix[row].astype("<f4").tobytes())
    return written


def write_embeddings_tsv(table: EmbeddingTable, path: Union[str, Path]) -> int:
    """Write the TSV format (id, comma-joined components); loads back exactly."""
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row, news_id in enumerate(table.ids):
            # repr of the float64 promotion round-trips the float32 exactly
            values = ",".join(repr(float(component)) for component in table.matrix[row])
            written += handle.write(f"{news_id}\t{values}\n")
    return written


def _load_binary(handle: IO[bytes], path: str) -> EmbeddingTable:
    header = handle.read(17)
    if len(header) != 17 or header[:4] != MAGIC:
        raise ValueError(f"{path}: truncated or invalid header")
    version, dim, count = struct.unpack("<BIQ", header[4:])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    if dim < 1:
        raise ValueError(f"{path}: invalid dimension {dim}")
    ids: list[str] = []
    matrix = np.empty((count, dim), dtype=np.float32)
    record_bytes = 4 * dim
    for row in range(count):
        raw_len = handle.read(2)
        if len(raw_len) != 2:
            raise ValueError(f"{path}: truncated record {row}")
        (id_len,) = struct.unpack("<H", raw_len)
        raw_id = handle.read(id_len)
        payload = handle.read(record_bytes)
        if len(raw_id) != id_len or len(payload) != record_bytes:
            raise ValueError(f"{path}: truncated record {row}")
        ids.append(raw_id.decode("utf-8"))
        matrix[row] = np.frombuffer(payload, dtype="<f4")
    if handle.read(1):
        raise ValueError(f"{path}: trailing bytes after {count} records")
    return EmbeddingTable(dim=int(dim), ids=tuple(ids), matrix=matrix)


def _load_tsv(handle: IO[bytes], path: str) -> EmbeddingTable:
    ids: list[str] = []
    rows: list[np.ndarray] = []
    dim: int | None = None
    for lineno, raw_line in enumerate(handle, start=1):
        line = raw_line.decode("utf-8").rstrip("\n")
        if not line:
            continue
        news_id, sep, values = line.partition("\t")
        if not sep or not news_id:
            raise ValueError(f"{path} line {lineno}: expected 'id<TAB>v1,v2,...'")
        try:
            vec = np.array([float(component) for component in values.split(",")], dtype=np.float32)
        except ValueError as exc:
            raise ValueError(f"{path} line {lineno}: bad float for id {news_id!r}") from exc
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise ValueError(f"{path} line {lineno}: dim mismatch for id {news_id!r}: expected {dim}, got {len(vec)}")
        ids.append(news_id)
        rows.append(vec)
    if dim is None:
        raise ValueError(f"{path}: empty embedding file")
    return EmbeddingTable(dim=dim, ids=tuple(ids), matrix=np.vstack(rows))


def load_embeddings(path: Union[str, Path]) -> EmbeddingTable:
    """Load a table from disk, autodetecting binary vs TSV by magic bytes."""
    path = Path(path)
    with open(path, "rb") as handle:
        magic = handle.read(4)
        handle.seek(0)
        if magic == MAGIC:
            return _load_binary(handle, str(path))
        return _load_tsv(handle, str(path))


def fetch_remote_embeddings(
    endpoint: str,
    texts: Sequence[str],
    retries: int = 2,
    timeout: float = 30.0,
) -> np.ndarray:
    """POST texts to an /embed endpoint and return float32 vectors.

    Contract: request {"texts": [...]}, response {"vectors": [[...]]} with
    one vector per text in order. Transport failures are retried up to
    ``retries`` extra attempts; protocol violations are not.
    """
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        try:
            response = requests.post(endpoint, json={"texts": list(texts)}, timeout=timeout)
            break
        except requests.RequestException as exc:
            last_error = exc
            log.warning("embedding fetch attempt %d/%d failed: %s", attempt + 1, retries + 1, exc)
    else:
        raise ConnectionError(f"embedding endpoint unreachable after {retries + 1} attempts: {last_error}")
    if response.status_code != 200:
        raise ValueError(f"embedding endpoint returned status {response.status_code}")
    payload = response.json()
    vectors = payload.get("vectors")
    if not isinstance(vectors, list) or len(vectors) != len(texts):
        got = len(vectors) if isinstance(vectors, list) else "none"
        raise ValueError(f"embedding endpoint returned {got} vectors for {len(texts)} texts")
    matrix = np.asarray(vectors, dtype=np.float32)
    if matrix.ndim != 2:
        raise ValueError("embedding endpoint returned vectors of unequal dimension")
    if matrix.size and not np.isfinite(matrix).all():
        raise ValueError("embedding endpoint returned non-finite values")
    return matrix


def user_score(candidate_vec: np.ndarray, history_vecs: np.ndarray) -> float:
    """Mean of dot products between the candidate and each history vector.

    Dots are accumulated in float64 and summed exactly (math.fsum), so the
    result does not depend on history order beyond the dots themselves.
    """
    history = np.asarray(history_vecs, dtype=np.float64)
    if history.ndim != 2 or history.shape[0] == 0:
        raise ColdUserError("cold user: empty click history")
    candidate = np.asarray(candidate_vec, dtype=np.float64)
    if candidate.shape != (history.shape[1],):
        raise ValueError(f"dim mismatch: candidate {candidate.shape} vs history {history.shape}")
    dots = history @ candidate
    return math.fsum(dots.tolist()) / history.shape[0]


@dataclass(frozen=True)
class ScoredCandidate:
    news_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class ScoredImpression:
    """Per-candidate scores and ranks; ``cold`` marks empty-history users."""

    candidates: tuple[ScoredCandidate, ...]
    cold: bool = False


def score_impression(
    impression: Impression,
    table: EmbeddingTable,
    max_history: int = 50,
    cold_policy: str = "error",
) -> ScoredImpression:
    """Score every candidate of one impression against the user's history.

    History is truncated to its last max_history entries (most recent
    clicks). Ranks are 1-based by descending score; ties keep candidate
    order. cold_policy 'zero' turns empty-history impressions into all-zero
    scores with the cold flag set instead of an error.
    """
    if cold_policy not in ("error", "zero"):
        raise ValueError(f"cold_policy must be 'error' or 'zero', got {cold_policy!r}")
    if max_history < 1:
        raise ValueError("max_history must be at least 1")
    retained = impression.history[-max_history:]
    needed = list(retained) + [news_id for news_id, _ in impression.candidates]
    missing = table.missing_from(needed)
    if missing:
        raise CoverageError(
            f"impression {impression.impression_id}: missing embeddings for {missing}",
            [("", news_id) for news_id in missing],
        )
    cold = len(retained) == 0
    if cold:
        if cold_policy == "error":
            raise ColdUserError(f"impression {impression.impression_id}: cold user under cold_policy=error")
        scores = [0.0 for _ in impression.candidates]
    else:
        history = np.stack([table.vector(news_id) for news_id in retained])
        scores = [user_score(table.vector(news_id), history) for news_id, _ in impression.candidates]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranks = [0] * len(scores)
    for rank, candidate_index in enumerate(order, start=1):
        ranks[candidate_index] = rank
    return ScoredImpression(
        candidates=tuple(
            ScoredCandidate(news_id=news_id, score=scores[i], rank=ranks[i])
            for i, (news_id, _) in enumerate(impression.candidates)
        ),
        cold=cold,
    )
