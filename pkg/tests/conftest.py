from datetime import datetime, timezone

import pytest

from newsxlt.types import Corpus, Impression, LanguageKey, NewsText, ParallelPair

ENG = LanguageKey("eng", "Latn")
DEU = LanguageKey("deu", "Latn")
RUS = LanguageKey("rus", "Cyrl")


def utc(year, month, day, hour=0, minute=0, second=0):
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


def news(news_id, text, key=ENG, source="cc"):
    return NewsText(id=news_id, text=text, key=key, source=source)


def corpus(*items):
    return Corpus.from_items(items)


def pair(src_id, src_text, tgt_id, tgt_text, src_key=ENG, tgt_key=DEU, source="cc"):
    return ParallelPair(
        src=NewsText(id=src_id, text=src_text, key=src_key, source=source),
        tgt=NewsText(id=tgt_id, text=tgt_text, key=tgt_key, source=source),
    )


def impression(imp_id, history, candidates, user="u1", ts=None):
    return Impression(
        impression_id=imp_id,
        user_id=user,
        timestamp=ts or utc(2019, 11, 15, 8, 30, 0),
        history=tuple(history),
        candidates=tuple(candidates),
    )


@pytest.fixture
def small_corpus():
    return corpus(
        news("a1", "the quick brown fox jumps over the lazy dog"),
        news("a2", "pack my box with five dozen liquor jugs"),
        news("b1", "Der schnelle braune Fuchs springt hoch", key=DEU),
        news("c1", "Быстрая коричневая лиса прыгает высоко", key=RUS),
    )
