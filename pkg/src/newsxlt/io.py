"""Parsers and writers for the on-disk corpus formats.

All formats are line-oriented UTF-8 with LF endings:

* news JSONL: one object per line with keys id, text, lang, script, source
* parallel JSONL: src_lang, src_script, tgt_lang, tgt_script, src_text,
  tgt_text, source
* behaviors TSV: impression_id, user_id, time, history, candidates
  (five tab-separated columns, space-separated ids within a column)
* seq2seq JSONL: input, target, objective, plus lang (dae) or
  src_lang/tgt_lang (mt)

Parsers normalize text fields and report errors with 1-based line numbers.
Writers are deterministic: equal inputs produce byte-identical files.
"""

from __future__ import annotations

import datetime as dt
import json
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

from .normalize import normalize_text
from .types import Corpus, Impression, LanguageKey, NewsText, ParallelPair, Seq2SeqExample

Source = Union[str, Path, IO[str]]

_TIME_FORMAT = "%m/%d/%Y %I:%M:%S %p"


class FormatError(ValueError):
    """A malformed input file; the message carries the line number."""


@contextmanager
def _open_read(source: Source) -> Iterator[IO[str]]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            yield handle
    else:
        yield source


@contextmanager
def _open_write(sink: Source) -> Iterator[IO[str]]:
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as handle:
            yield handle
    else:
        yield sink


def _json_line(obj: dict, lineno: int) -> dict:
    try:
        parsed = json.loads(obj)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(parsed, dict):
        raise FormatError(f"line {lineno}: expected a JSON object")
    return parsed


def _require(record: dict, key: str, lineno: int) -> str:
    value = record.get(key)
    if not isinstance(value, str) or not value:
        raise FormatError(f"line {lineno}: missing or empty field {key!r}")
    return value


def _language_key(lang: str, script: str, lineno: int) -> LanguageKey:
    try:
        return LanguageKey(lang, script)
    except ValueError as exc:
        raise FormatError(f"line {lineno}: {exc}") from exc


def parse_news_jsonl(source: Source) -> Corpus:
    """Read a news JSONL file into a :class:`Corpus` in file order.

    Text fields are normalized on the way in. Raises :class:`FormatError`
    on malformed JSON, missing fields, invalid language keys, texts that
    normalize to the empty string, or duplicate ids.
    """
    items: list[NewsText] = []
    seen: set[str] = set()
    with _open_read(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = _json_line(line, lineno)
            news_id = _require(record, "id", lineno)
            if news_id in seen:
                raise FormatError(f"line {lineno}: duplicate news id {news_id!r}")
            seen.add(news_id)
            text = normalize_text(_require(record, "text", lineno))
            if not text:
                raise FormatError(f"line {lineno}: text is empty after normalization (id={news_id!r})")
            key = _language_key(_require(record, "lang", lineno), _require(record, "script", lineno), lineno)
            items.append(NewsText(id=news_id, text=text, key=key, source=_require(record, "source", lineno)))
    return Corpus(tuple(items))


def write_news_jsonl(corpus: Iterable[NewsText], sink: Source) -> int:
    """Write news texts as JSONL; returns the number of bytes written."""
    written = 0
    with _open_write(sink) as handle:
        for item in corpus:
            line = json.dumps(
                {
                    "id": item.id,
                    "text": item.text,
                    "lang": item.key.lang,
                    "script": item.key.script,
                    "source": item.source,
                },
                ensure_ascii=False,
                separators=(",", ":"),
            )
            written += handle.write(line + "\n")
    return written


def parse_parallel_jsonl(source: Source) -> list[ParallelPair]:
    """Read a parallel JSONL file into pairs in file order.

    The wire format carries no ids, so each side gets a deterministic id
    derived from its line number (``<line>.src`` / ``<line>.tgt``).
    """
    pairs: list[ParallelPair] = []
    with _open_read(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = _json_line(line, lineno)
            src_key = _language_key(
                _require(record, "src_lang", lineno), _require(record, "src_script", lineno), lineno
            )
            tgt_key = _language_key(
                _require(record, "tgt_lang", lineno), _require(record, "tgt_script", lineno), lineno
            )
            source_name = _require(record, "source", lineno)
            src_text = normalize_text(_require(record, "src_text", lineno))
            tgt_text = normalize_text(_require(record, "tgt_text", lineno))
            if not src_text or not tgt_text:
                raise FormatError(f"line {lineno}: text is empty after normalization")
            try:
                pairs.append(
                    ParallelPair(
                        src=NewsText(id=f"{lineno}.src", text=src_text, key=src_key, source=source_name),
                        tgt=NewsText(id=f"{lineno}.tgt", text=tgt_text, key=tgt_key, source=source_name),
                    )
                )
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    return pairs


def write_parallel_jsonl(pairs: Iterable[ParallelPair], sink: Source) -> int:
    written = 0
    with _open_write(sink) as handle:
        for pair in pairs:
            line = json.dumps(
                {
                    "src_lang": pair.src.key.lang,
                    "src_script": pair.src.key.script,
                    "tgt_lang": pair.tgt.key.lang,
                    "tgt_script": pair.tgt.key.script,
                    "src_text": pair.src.text,
                    "tgt_text": pair.tgt.text,
                    "source": pair.source,
                },
                ensure_ascii=False,
                separators=(",", ":"),
            )
            written += handle.write(line + "\n")
    return written


def _parse_timestamp(raw: str, lineno: int) -> dt.datetime:
    try:
        parsed = dt.datetime.strptime(raw, _TIME_FORMAT)
    except ValueError as exc:
        raise FormatError(f"line {lineno}: invalid timestamp {raw!r}") from exc
    return parsed.replace(tzinfo=dt.timezone.utc)


def format_timestamp(ts: dt.datetime) -> str:
    """Render a timestamp in the behaviors-TSV convention (no zero padding)."""
    hour12 = ts.hour % 12 or 12
    meridiem = "AM" if ts.hour < 12 else "PM"
    return f"{ts.month}/{ts.day}/{ts.year} {hour12}:{ts.minute:02d}:{ts.second:02d} {meridiem}"


def parse_behaviors_tsv(source: Source) -> list[Impression]:
    """Read a behaviors TSV click log into impressions in file order.

    Columns: impression id, user id, timestamp, space-separated history
    (may be empty), and space-separated ``newsID-label`` candidates where
    the label follows the last hyphen.
    """
    impressions: list[Impression] = []
    seen: set[str] = set()
    with _open_read(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            columns = line.split("\t")
            if len(columns) != 5:
                raise FormatError(f"line {lineno}: expected 5 tab-separated columns, got {len(columns)}")
            impression_id, user_id, raw_time, raw_history, raw_candidates = columns
            if not impression_id:
                raise FormatError(f"line {lineno}: empty impression id")
            if impression_id in seen:
                raise FormatError(f"line {lineno}: duplicate impression id {impression_id!r}")
            seen.add(impression_id)
            candidates: list[tuple[str, int]] = []
            for token in raw_candidates.split():
                news_id, sep, raw_label = token.rpartition("-")
                if not sep or not news_id or raw_label not in ("0", "1"):
                    raise FormatError(f"line {lineno}: malformed candidate {token!r}")
                candidates.append((news_id, int(raw_label)))
            try:
                impressions.append(
                    Impression(
                        impression_id=impression_id,
                        user_id=user_id,
                        timestamp=_parse_timestamp(raw_time, lineno),
                        history=tuple(raw_history.split()),
                        candidates=tuple(candidates),
                    )
                )
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    return impressions


def write_behaviors_tsv(impressions: Iterable[Impression], sink: Source) -> int:
    written = 0
    with _open_write(sink) as handle:
        for imp in impressions:
            row = "\t".join(
                (
                    imp.impression_id,
                    imp.user_id,
                    format_timestamp(imp.timestamp),
                    " ".join(imp.history),
                    " ".join(f"{news_id}-{label}" for news_id, label in imp.candidates),
                )
            )
            written += handle.write(row + "\n")
    return written


def parse_seq2seq_jsonl(source: Source) -> list[Seq2SeqExample]:
    examples: list[Seq2SeqExample] = []
    with _open_read(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = _json_line(line, lineno)
            objective = _require(record, "objective", lineno)
            lang_or_pair: Union[LanguageKey, tuple[LanguageKey, LanguageKey]]
            try:
                if objective == "mt":
                    lang_or_pair = (
                        LanguageKey.from_tag(_require(record, "src_lang", lineno)),
                        LanguageKey.from_tag(_require(record, "tgt_lang", lineno)),
                    )
                else:
                    lang_or_pair = LanguageKey.from_tag(_require(record, "lang", lineno))
                examples.append(
                    Seq2SeqExample(
                        input=_require(record, "input", lineno),
                        target=_require(record, "target", lineno),
                        objective=objective,
                        lang_or_pair=lang_or_pair,
                    )
                )
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    return examples


def write_seq2seq_jsonl(examples: Iterable[Seq2SeqExample], sink: Source) -> int:
    """Write seq2seq examples as JSONL; returns the number of bytes written."""
    written = 0
    with _open_write(sink) as handle:
        for example in examples:
            record: dict[str, str] = {
                "input": example.input,
                "target": example.target,
                "objective": example.objective,
            }
            if example.objective == "mt":
                src_key, tgt_key = example.lang_or_pair  # type: ignore[misc]
                record["src_lang"] = src_key.tag
                record["tgt_lang"] = tgt_key.tag
            else:
                record["lang"] = example.lang_or_pair.tag  # type: ignore[union-attr]
            written += handle.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
    return written
