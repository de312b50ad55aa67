"""Core domain types for multilingual news corpora and click logs."""

from __future__ import annotations

import datetime as dt
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

_LANG_RE = re.compile(r"^[a-z]{3}$")
_SCRIPT_RE = re.compile(r"^[A-Z][a-z]{3}$")

Objective = str  # "dae" | "mt"
OBJECTIVES = ("dae", "mt")


@dataclass(frozen=True, order=True)
class LanguageKey:
    """A language identified by ISO 639-3 code plus ISO 15924 script code.

    The textual form is ``<lang>_<script>``, e.g. ``eng_Latn`` or ``srp_Cyrl``.
    The same language may appear under several scripts and each combination is
    a distinct key.
    """

    lang: str
    script: str

    def __post_init__(self) -> None:
        if not _LANG_RE.match(self.lang):
            raise ValueError(f"invalid language code {self.lang!r}: expected 3 lowercase letters")
        if not _SCRIPT_RE.match(self.script):
            raise ValueError(
                f"invalid script code {self.script!r}: expected 1 uppercase + 3 lowercase letters"
            )

    @property
    def tag(self) -> str:
        return f"{self.lang}_{self.script}"

    @classmethod
    def from_tag(cls, tag: str) -> "LanguageKey":
        lang, sep, script = tag.partition("_")
        if not sep:
            raise ValueError(f"invalid language tag {tag!r}: expected <lang>_<script>")
        return cls(lang, script)

    def __str__(self) -> str:
        return self.tag


@dataclass(frozen=True)
class NewsText:
    """One news text (title, sentence, or article body) in one language.

    ``text`` is expected to be already normalized (see
    :func:`newsxlt.normalize.normalize_text`); parsers take care of that.
    """

    id: str
    text: str
    key: LanguageKey
    source: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("news id must be non-empty")
        if not self.text:
            raise ValueError(f"news text must be non-empty (id={self.id!r})")
        if not self.source:
            raise ValueError(f"news source must be non-empty (id={self.id!r})")

    @property
    def char_len(self) -> int:
        """Length in Unicode scalar values."""
        return len(self.text)


@dataclass(frozen=True)
class ParallelPair:
    """A translation pair; ``src`` and ``tgt`` must differ in language key."""

    src: NewsText
    tgt: NewsText

    def __post_init__(self) -> None:
        if self.src.key == self.tgt.key:
            raise ValueError(f"parallel pair must span two language keys, got {self.src.key.tag} twice")

    @property
    def pair_key(self) -> tuple[LanguageKey, LanguageKey]:
        return (self.src.key, self.tgt.key)

    @property
    def source(self) -> str:
        return self.src.source


@dataclass(frozen=True)
class Impression:
    """One behaviors-log row: a user's click history and labeled candidates.

    ``candidates`` holds ``(news_id, label)`` with label 1 for click, 0 for
    skip. ``history`` is ordered oldest to newest; ``timestamp`` is UTC.
    """

    impression_id: str
    user_id: str
    timestamp: dt.datetime
    history: tuple[str, ...]
    candidates: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        if not self.impression_id:
            raise ValueError("impression_id must be non-empty")
        if not self.user_id:
            raise ValueError(f"user_id must be non-empty (impression {self.impression_id})")
        if self.timestamp.tzinfo is None:
            raise ValueError(f"timestamp must be timezone-aware (impression {self.impression_id})")
        if not self.candidates:
            raise ValueError(f"impression {self.impression_id} has no candidates")
        for news_id, label in self.candidates:
            if label not in (0, 1):
                raise ValueError(
                    f"impression {self.impression_id}: label for {news_id!r} must be 0 or 1, got {label!r}"
                )

    @property
    def day(self) -> dt.date:
        return self.timestamp.date()

    def positives(self) -> tuple[str, ...]:
        return tuple(news_id for news_id, label in self.candidates if label == 1)


@dataclass(frozen=True)
class Seq2SeqExample:
    """One training example for a denoising or translation objective.

    ``lang_or_pair`` is a single :class:`LanguageKey` for ``dae`` and an
    ``(input_key, target_key)`` tuple for ``mt``.
    """

    input: str
    target: str
    objective: Objective
    lang_or_pair: Union[LanguageKey, tuple[LanguageKey, LanguageKey]]

    def __post_init__(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.input or not self.target:
            raise ValueError("seq2seq input and target must be non-empty")
        is_pair = isinstance(self.lang_or_pair, tuple)
        if self.objective == "mt" and not is_pair:
            raise ValueError("mt examples need an (input_key, target_key) pair")
        if self.objective == "dae" and is_pair:
            raise ValueError("dae examples take a single LanguageKey")


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of news texts with unique ids."""

    items: tuple[NewsText, ...]
    per_key_counts: dict[LanguageKey, int] = field(init=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for item in self.items:
            if item.id in seen:
                raise ValueError(f"duplicate news id {item.id!r} in corpus")
            seen.add(item.id)
        counts = Counter(item.key for item in self.items)
        object.__setattr__(self, "per_key_counts", dict(counts))

    @classmethod
    def from_items(cls, items: Iterable[NewsText]) -> "Corpus":
        return cls(tuple(items))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[NewsText]:
        return iter(self.items)

    def by_key(self) -> dict[LanguageKey, list[NewsText]]:
        """Group items by language key, preserving input order within groups."""
        groups: dict[LanguageKey, list[NewsText]] = {}
        for item in self.items:
            groups.setdefault(item.key, []).append(item)
        return groups
