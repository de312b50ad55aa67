import pytest

from newsxlt.types import Corpus, Impression, LanguageKey, NewsText, ParallelPair, Seq2SeqExample

from conftest import DEU, ENG, RUS, impression, news, utc


class TestLanguageKey:
    def test_tag_round_trip(self):
        key = LanguageKey("srp", "Cyrl")
        assert key.tag == "srp_Cyrl"
        assert LanguageKey.from_tag("srp_Cyrl") == key

    @pytest.mark.parametrize("lang", ["en", "ENG", "engl", "e1g", ""])
    def test_rejects_bad_language(self, lang):
        with pytest.raises(ValueError):
            LanguageKey(lang, "Latn")

    @pytest.mark.parametrize("script", ["latn", "LATN", "La", "Lat1", ""])
    def test_rejects_bad_script(self, script):
        with pytest.raises(ValueError):
            LanguageKey("eng", script)

    @pytest.mark.parametrize("tag", ["eng", "engLatn", "eng-Latn", "eng_Latn_x"])
    def test_rejects_bad_tag(self, tag):
        with pytest.raises(ValueError):
            LanguageKey.from_tag(tag)

    def test_ordering_is_stable(self):
        keys = [LanguageKey("srp", "Latn"), LanguageKey("deu", "Latn"), LanguageKey("srp", "Cyrl")]
        assert sorted(keys) == [keys[1], keys[2], keys[0]]


class TestNewsText:
    def test_char_len(self):
        assert news("n1", "hello").char_len == 5

    def test_rejects_empty_id_or_text(self):
        with pytest.raises(ValueError):
            NewsText(id="", text="x", key=ENG, source="cc")
        with pytest.raises(ValueError):
            NewsText(id="n1", text="", key=ENG, source="cc")


class TestParallelPair:
    def test_rejects_same_key_on_both_sides(self):
        with pytest.raises(ValueError):
            ParallelPair(src=news("s", "hello"), tgt=news("t", "world"))

    def test_pair_key_and_source(self):
        p = ParallelPair(src=news("s", "hello"), tgt=news("t", "hallo", key=DEU))
        assert p.pair_key == (ENG, DEU)
        assert p.source == "cc"


class TestImpression:
    def test_requires_timezone_aware_timestamp(self):
        from datetime import datetime

        with pytest.raises(ValueError):
            Impression("i1", "u1", datetime(2019, 11, 15), ("a",), (("b", 1),))

    def test_rejects_empty_candidates(self):
        with pytest.raises(ValueError):
            impression("i1", ["a"], [])

    def test_rejects_non_binary_label(self):
        with pytest.raises(ValueError):
            impression("i1", ["a"], [("b", 2)])

    def test_day_and_positives(self):
        imp = impression("i1", [], [("a", 1), ("b", 0), ("c", 1)], ts=utc(2019, 11, 15, 23, 59))
        assert imp.day == utc(2019, 11, 15).date()
        assert imp.positives() == ("a", "c")


class TestSeq2SeqExample:
    def test_dae_takes_single_language(self):
        ex = Seq2SeqExample(input="a b", target="a b c", objective="dae", lang_or_pair=ENG)
        assert ex.lang_or_pair == ENG

    def test_mt_takes_language_pair(self):
        ex = Seq2SeqExample(input="hello", target="hallo", objective="mt", lang_or_pair=(ENG, DEU))
        assert ex.lang_or_pair == (ENG, DEU)

    def test_objective_and_shape_must_agree(self):
        with pytest.raises(ValueError):
            Seq2SeqExample(input="a", target="b", objective="dae", lang_or_pair=(ENG, DEU))
        with pytest.raises(ValueError):
            Seq2SeqExample(input="a", target="b", objective="mt", lang_or_pair=ENG)
        with pytest.raises(ValueError):
            Seq2SeqExample(input="a", target="b", objective="span", lang_or_pair=ENG)


class TestCorpus:
    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError, match="n1"):
            Corpus.from_items([news("n1", "a"), news("n1", "b")])

    def test_per_key_counts(self, small_corpus):
        assert small_corpus.per_key_counts == {ENG: 2, DEU: 1, RUS: 1}

    def test_by_key_preserves_input_order(self, small_corpus):
        groups = small_corpus.by_key()
        assert [item.id for item in groups[ENG]] == ["a1", "a2"]

    def test_len_and_iter(self, small_corpus):
        assert len(small_corpus) == 4
        assert [item.id for item in small_corpus] == ["a1", "a2", "b1", "c1"]
