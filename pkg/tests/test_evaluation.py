import csv
import json
import math

import numpy as np
import pytest

from newsxlt.evaluation import (
    checkpoint_select,
    fewshot_export,
    load_checkpoint_tables,
    run_xlt_eval,
    split_by_day,
)
from newsxlt.scoring import CoverageError, EmbeddingTable, write_embeddings_binary, write_embeddings_tsv

from conftest import impression, utc


def table(entries):
    return EmbeddingTable.from_entries(entries)


def rank_fixture_tables():
    """Dot products with history [1.0] come out as 0.9 / 0.5 / 0.8."""
    return table({"h": [1.0], "c1": [0.9], "c2": [0.5], "c3": [0.8]})


class TestSplitByDay:
    def test_last_day_becomes_validation(self):
        imps = [
            impression("i1", [], [("a", 1)], ts=utc(2019, 11, 9, 10)),
            impression("i2", [], [("a", 1)], ts=utc(2019, 11, 12, 8)),
            impression("i3", [], [("a", 1)], ts=utc(2019, 11, 11, 23)),
        ]
        train, validation = split_by_day(imps)
        assert [i.impression_id for i in train] == ["i1", "i3"]
        assert [i.impression_id for i in validation] == ["i2"]

    def test_single_day_rejected(self):
        imps = [impression("i1", [], [("a", 1)], ts=utc(2019, 11, 9, 1))]
        with pytest.raises(ValueError):
            split_by_day(imps)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            split_by_day([])


class TestRunXltEval:
    def test_single_impression_rank_fixture(self):
        imp = impression("i1", ["h"], [("c1", 0), ("c2", 1), ("c3", 0)])
        report = run_xlt_eval([imp], {"eng_Latn": rank_fixture_tables()}, "eng_Latn")
        stats = report.per_language["eng_Latn"]
        assert stats["ndcg@10"][0] == pytest.approx(0.5)
        assert stats["mrr"][0] == pytest.approx(1 / 3)
        assert stats["auc"][0] == pytest.approx(0.0)
        assert stats["auc"][1] == 1

    def test_identical_tables_zero_delta(self):
        shared = rank_fixture_tables()
        imps = [
            impression("i1", ["h"], [("c1", 1), ("c2", 0)]),
            impression("i2", ["h"], [("c2", 1), ("c3", 0)]),
        ]
        tables = {"eng_Latn": shared, "deu_Latn": shared, "rus_Cyrl": shared}
        report = run_xlt_eval(imps, tables, "eng_Latn")
        for name in report.metric_names:
            assert report.delta_percent[name] == 0.0

    def test_avg_excludes_source(self):
        imps = [impression("i1", ["h"], [("c1", 1), ("c2", 0)])]
        source = rank_fixture_tables()
        target = table({"h": [1.0], "c1": [0.1], "c2": [0.9], "c3": [0.2]})
        report = run_xlt_eval(imps, {"eng_Latn": source, "deu_Latn": target}, "eng_Latn")
        assert report.eng["auc"] == pytest.approx(1.0)
        assert report.avg["auc"] == pytest.approx(0.0)

    def test_source_must_have_table(self):
        imp = impression("i1", ["h"], [("c1", 1)])
        with pytest.raises(ValueError, match="zzz_Latn"):
            run_xlt_eval([imp], {"eng_Latn": rank_fixture_tables()}, "zzz_Latn")

    def test_empty_log_rejected(self):
        with pytest.raises(ValueError):
            run_xlt_eval([], {"eng_Latn": rank_fixture_tables()}, "eng_Latn")

    def test_coverage_validated_before_scoring(self):
        imps = [impression("i1", ["h"], [("c1", 1), ("ghost", 0)])]
        tables = {"eng_Latn": rank_fixture_tables(), "deu_Latn": rank_fixture_tables()}
        with pytest.raises(CoverageError) as exc_info:
            run_xlt_eval(imps, tables, "eng_Latn")
        assert ("eng_Latn", "ghost") in exc_info.value.missing
        assert ("deu_Latn", "ghost") in exc_info.value.missing

    def test_truncated_history_not_required_for_coverage(self):
        history = ["outside"] + ["h"] * 50
        imps = [impression("i1", history, [("c1", 1), ("c2", 0)])]
        report = run_xlt_eval(imps, {"eng_Latn": rank_fixture_tables()}, "eng_Latn", max_history=50)
        assert report.per_language["eng_Latn"]["auc"][1] == 1

    def test_cold_and_skip_counting(self):
        imps = [
            impression("i1", [], [("c1", 1), ("c2", 0)]),
            impression("i2", ["h"], [("c1", 1), ("c3", 1)]),
        ]
        report = run_xlt_eval(imps, {"eng_Latn": rank_fixture_tables()}, "eng_Latn", cold_policy="zero")
        assert report.cold_count == 1
        assert report.auc_skipped_count == 1
        assert report.per_language["eng_Latn"]["auc"][1] == 1

    def test_thread_count_invariant(self):
        rng = np.random.default_rng(3)
        ids = [f"n{i}" for i in range(40)]
        t1 = table([(i, rng.normal(size=8).astype(np.float32)) for i in ids])
        t2 = table([(i, rng.normal(size=8).astype(np.float32)) for i in ids])
        imps = [
            impression(f"i{j}", ids[j : j + 3], [(ids[j + 5], 1), (ids[j + 6], 0), (ids[j + 7], 0)])
            for j in range(30)
        ]
        tables = {"eng_Latn": t1, "deu_Latn": t2}
        serial = run_xlt_eval(imps, tables, "eng_Latn", threads=1)
        threaded = run_xlt_eval(imps, tables, "eng_Latn", threads=4)
        assert serial.to_json_dict() == threaded.to_json_dict()

    def test_report_json_and_csv(self, tmp_path):
        imp = impression("i1", ["h"], [("c1", 0), ("c2", 1), ("c3", 0)])
        report = run_xlt_eval([imp], {"eng_Latn": rank_fixture_tables()}, "eng_Latn")
        json_path = tmp_path / "report.json"
        csv_path = tmp_path / "report.csv"
        report.write_json(json_path)
        report.write_csv(csv_path)
        payload = json.loads(json_path.read_text())
        assert payload["source_language"] == "eng_Latn"
        assert payload["per_language"]["eng_Latn"]["ndcg@10"]["mean"] == pytest.approx(0.5)
        rows = list(csv.DictReader(csv_path.open()))
        ndcg_rows = [r for r in rows if r["language"] == "eng_Latn" and r["metric"] == "ndcg@10"]
        assert float(ndcg_rows[0]["mean"]) == pytest.approx(0.5)


class TestCheckpointSelect:
    def better_and_worse(self):
        good = table({"h": [1.0], "c1": [0.9], "c2": [0.1]})
        bad = table({"h": [1.0], "c1": [0.1], "c2": [0.9]})
        return good, bad

    def test_dominant_checkpoint_selected(self):
        good, bad = self.better_and_worse()
        imps = [impression("i1", ["h"], [("c1", 1), ("c2", 0)])]
        selection = checkpoint_select(
            [("bad_ck", {"eng_Latn": bad}), ("good_ck", {"eng_Latn": good})],
            imps,
            "eng_Latn",
        )
        assert selection.best_id == "good_ck"
        assert selection.mean_ndcg10["good_ck"] == pytest.approx(1.0)
        assert selection.mean_ndcg10["bad_ck"] == pytest.approx(1 / math.log2(3))

    def test_tie_picks_earliest(self):
        good, _ = self.better_and_worse()
        imps = [impression("i1", ["h"], [("c1", 1), ("c2", 0)])]
        selection = checkpoint_select(
            [("first", {"eng_Latn": good}), ("second", {"eng_Latn": good})],
            imps,
            "eng_Latn",
        )
        assert selection.best_id == "first"

    def test_mean_includes_source_language(self):
        good, bad = self.better_and_worse()
        imps = [impression("i1", ["h"], [("c1", 1), ("c2", 0)])]
        selection = checkpoint_select(
            [("ck", {"eng_Latn": good, "deu_Latn": bad})], imps, "eng_Latn"
        )
        assert selection.mean_ndcg10["ck"] == pytest.approx((1.0 + 1 / math.log2(3)) / 2)
        assert selection.per_language_ndcg10["ck"]["deu_Latn"] == pytest.approx(1 / math.log2(3))

    def test_empty_checkpoints_rejected(self):
        with pytest.raises(ValueError):
            checkpoint_select([], [impression("i1", ["h"], [("c1", 1)])], "eng_Latn")

    def test_coverage_error_names_checkpoint(self):
        good, _ = self.better_and_worse()
        imps = [impression("i1", ["h"], [("ghost", 1), ("c1", 0)])]
        with pytest.raises(CoverageError, match="ck0"):
            checkpoint_select([("ck0", {"eng_Latn": good})], imps, "eng_Latn")


class TestLoadCheckpointTables:
    def test_loads_binary_and_tsv(self, tmp_path):
        good = table({"h": [1.0, 0.0], "c1": [0.5, 0.5]})
        ck = tmp_path / "ck0"
        ck.mkdir()
        write_embeddings_binary(good, ck / "eng_Latn.nbem")
        write_embeddings_tsv(good, ck / "deu_Latn.tsv")
        tables = load_checkpoint_tables(ck, ["eng_Latn", "deu_Latn"])
        assert set(tables) == {"eng_Latn", "deu_Latn"}
        assert np.array_equal(tables["eng_Latn"].matrix, tables["deu_Latn"].matrix)

    def test_missing_language_file_rejected(self, tmp_path):
        ck = tmp_path / "ck0"
        ck.mkdir()
        with pytest.raises(FileNotFoundError, match="rus_Cyrl"):
            load_checkpoint_tables(ck, ["rus_Cyrl"])


class TestFewshotExport:
    def make_log(self, n=20):
        return [
            impression(
                f"i{j}",
                ["h"],
                [(f"p{j}", 1), (f"n{j}a", 0), (f"n{j}b", 0), (f"n{j}c", 0)],
                ts=utc(2019, 11, 9 + j % 3, 8),
            )
            for j in range(n)
        ]

    def test_deterministic_and_order_preserving(self):
        log = self.make_log()
        first, _ = fewshot_export(log, 5, seed=1)
        second, _ = fewshot_export(log, 5, seed=1)
        different, _ = fewshot_export(log, 5, seed=2)
        assert first == second
        assert [i.impression_id for i in first] != [i.impression_id for i in different]
        positions = [log.index(imp) for imp in first]
        assert positions == sorted(positions)

    def test_full_population_is_identity(self):
        log = self.make_log(6)
        subset, _ = fewshot_export(log, 6, seed=0)
        assert subset == log

    def test_oversample_rejected(self):
        with pytest.raises(ValueError):
            fewshot_export(self.make_log(4), 5, seed=0)

    def test_no_negatives_requested(self):
        _, tuples = fewshot_export(self.make_log(), 3, seed=0)
        assert tuples is None

    def test_training_tuples(self):
        log = self.make_log()
        subset, tuples = fewshot_export(log, 4, seed=3, negatives_per_positive=2)
        assert len(tuples) == 4
        by_id = {imp.impression_id: imp for imp in subset}
        for row in tuples:
            imp = by_id[row["impression_id"]]
            assert row["positive"] in imp.positives()
            negatives = {nid for nid, label in imp.candidates if label == 0}
            assert len(row["negatives"]) == 2
            assert set(row["negatives"]) <= negatives

    def test_negatives_capped_at_available(self):
        log = [impression("i1", ["h"], [("p", 1), ("n1", 0)], ts=utc(2019, 11, 9, 8))]
        _, tuples = fewshot_export(log, 1, seed=0, negatives_per_positive=4)
        assert tuples[0]["negatives"] == ["n1"]

    def test_multi_positive_impressions_emit_one_tuple_per_positive(self):
        log = [
            impression(
                "i1", ["h"], [("p1", 1), ("p2", 1), ("n1", 0), ("n2", 0)], ts=utc(2019, 11, 9, 8)
            )
        ]
        _, tuples = fewshot_export(log, 1, seed=0, negatives_per_positive=1)
        assert [row["positive"] for row in tuples] == ["p1", "p2"]
