"""Command-line entry point: one binary, seven subcommands.

Subcommands: build-corpus, corpus-stats, sample-export,
validate-embeddings, evaluate, select-checkpoint, fewshot-export.
Configuration comes from an optional JSON file (--config); command-line
flags always win. NEWSXLT_LOG selects log verbosity (error/warn/info/
debug); logs go to stderr, data only to stdout or files.

Exit codes: 0 success, 1 usage/IO/config error, 2 data-coverage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional, Sequence

from . import evaluation, io, metrics, pipeline, sampler, scoring
from .types import Corpus, LanguageKey

log = logging.getLogger(__name__)

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class UsageError(Exception):
    """Bad flags or config; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            config = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return config


def _io_default(config: dict, key: str, flag_value: Optional[str]) -> Optional[str]:
    if flag_value is not None:
        return flag_value
    value = config.get("io", {}).get(key)
    return str(value) if value is not None else None


def _require_path(config: dict, key: str, flag_value: Optional[str], flag: str) -> str:
    value = _io_default(config, key, flag_value)
    if value is None:
        raise UsageError(f"missing required {flag} (or io.{key} in the config file)")
    return value


def _pipeline_config(config: dict, args: argparse.Namespace) -> pipeline.PipelineConfig:
    section = dict(config.get("pipeline", {}))
    if getattr(args, "seed", None) is not None:
        section["seed"] = args.seed
    try:
        return pipeline.PipelineConfig(**section)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid pipeline config: {exc}") from exc


def _sampler_config(config: dict, args: argparse.Namespace) -> sampler.SamplerConfig:
    section = dict(config.get("sampler", {}))
    overrides = {
        "n_examples": args.n,
        "mode": args.mode,
        "alpha": args.alpha,
        "min_count": args.min_count,
        "deletion_ratio": args.ratio,
        "seed": args.seed,
        "phase_split": args.phase_split,
        "batch_size": args.batch_size,
    }
    for key, value in overrides.items():
        if value is not None:
            section[key] = value
    if "n_examples" not in section:
        raise UsageError("missing required --n (or sampler.n_examples in the config file)")
    try:
        return sampler.SamplerConfig(**section)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid sampler config: {exc}") from exc


def _eval_setting(config: dict, key: str, flag_value, default):
    if flag_value is not None:
        return flag_value
    return config.get("eval", {}).get(key, default)


def _parse_embedding_args(entries: Sequence[str]) -> dict[str, str]:
    tables: dict[str, str] = {}
    for entry in entries:
        tag, sep, path = entry.partition("=")
        if not sep or not tag or not path:
            raise UsageError(f"--embeddings expects TAG=PATH, got {entry!r}")
        try:
            LanguageKey.from_tag(tag)
        except ValueError as exc:
            raise UsageError(f"bad language tag in --embeddings {entry!r}: {exc}") from exc
        if tag in tables:
            raise UsageError(f"duplicate language tag {tag!r} in --embeddings")
        tables[tag] = path
    return tables


def _sniff_parallel(path: str) -> bool:
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                return False  # let the news parser report the line number
            return isinstance(record, dict) and "src_text" in record
    return False


def _scale_two_decimals(value: float) -> str:
    return str(Decimal(repr(value * 100.0)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def cmd_build_corpus(args: argparse.Namespace, config: dict) -> int:
    input_path = _require_path(config, "input", args.input, "--input")
    pipe_config = _pipeline_config(config, args)
    labels = pipeline.parse_lid_labels(args.lid_labels) if args.lid_labels else None
    threads = args.threads or os.cpu_count() or 1
    if _sniff_parallel(input_path):
        pairs = io.parse_parallel_jsonl(input_path)
        cleaned, stats = pipeline.run_parallel_pipeline(pairs, pipe_config, labels, threads=threads)
        writer = lambda sink: io.write_parallel_jsonl(cleaned, sink)  # noqa: E731
        kept, total = len(cleaned), len(pairs)
    else:
        corpus = io.parse_news_jsonl(input_path)
        cleaned_corpus, stats = pipeline.run_pipeline(corpus, pipe_config, labels, threads=threads)
        writer = lambda sink: io.write_news_jsonl(cleaned_corpus, sink)  # noqa: E731
        kept, total = len(cleaned_corpus), len(corpus)
    stats_json = json.dumps(stats.to_json_dict(), indent=2, sort_keys=True) + "\n"
    if args.stats:
        Path(args.stats).write_text(stats_json, encoding="utf-8")
    else:
        sys.stdout.write(stats_json)
    if not args.dry_run:
        output_path = _require_path(config, "output", args.output, "--output")
        writer(output_path)
    log.info("kept %d of %d records", kept, total)
    return 0


def cmd_corpus_stats(args: argparse.Namespace, config: dict) -> int:
    input_path = _require_path(config, "input", args.input, "--input")
    corpus = io.parse_news_jsonl(input_path)
    report: dict[str, dict] = {}
    for key, items in corpus.by_key().items():
        sources: dict[str, int] = {}
        for item in items:
            sources[item.source] = sources.get(item.source, 0) + 1
        report[key.tag] = {
            "count": len(items),
            "avg_char_len": sum(item.char_len for item in items) / len(items),
            "avg_byte_len": sum(len(item.text.encode("utf-8")) for item in items) / len(items),
            "sources": dict(sorted(sources.items())),
        }
    payload = json.dumps(
        {"languages": dict(sorted(report.items())), "total": len(corpus)}, indent=2, sort_keys=True
    )
    if args.output:
        Path(args.output).write_text(payload + "\n", encoding="utf-8")
    else:
        sys.stdout.write(payload + "\n")
    return 0


def cmd_sample_export(args: argparse.Namespace, config: dict) -> int:
    sample_config = _sampler_config(config, args)
    mono_path = _io_default(config, "mono", args.mono)
    parallel_path = _io_default(config, "parallel", args.parallel)
    mono = io.parse_news_jsonl(mono_path) if mono_path else None
    parallel = io.parse_parallel_jsonl(parallel_path) if parallel_path else None
    examples = sampler.schedule_examples(mono, parallel, sample_config)
    if args.dry_run:
        sys.stdout.write(f"would write {len(examples)} examples\n")
        return 0
    output_path = _require_path(config, "output", args.output, "--output")
    io.write_seq2seq_jsonl(examples, output_path)
    return 0


def _coverage_ids(impressions, max_history: int) -> list[str]:
    needed: list[str] = []
    seen: set[str] = set()
    for imp in impressions:
        for news_id in list(imp.history[-max_history:]) + [news_id for news_id, _ in imp.candidates]:
            if news_id not in seen:
                seen.add(news_id)
                needed.append(news_id)
    return needed


def cmd_validate_embeddings(args: argparse.Namespace, config: dict) -> int:
    behaviors_path = _require_path(config, "behaviors", args.behaviors, "--behaviors")
    impressions = io.parse_behaviors_tsv(behaviors_path)
    max_history = int(_eval_setting(config, "max_history", args.max_history, 50))
    tag_paths = _parse_embedding_args(args.embeddings or [])
    if not tag_paths:
        raise UsageError("at least one --embeddings TAG=PATH is required")
    needed = _coverage_ids(impressions, max_history)
    missing_total = 0
    for tag, path in tag_paths.items():
        table = scoring.load_embeddings(path)
        missing = table.missing_from(needed)
        missing_total += len(missing)
        for news_id in missing[:50]:
            sys.stdout.write(f"missing {tag} {news_id}\n")
        if len(missing) > 50:
            sys.stdout.write(f"missing {tag} ... ({len(missing) - 50} more)\n")
    sys.stdout.write(f"{missing_total} missing\n")
    return 0 if missing_total == 0 else 2


def _print_report(report: evaluation.EvalReport) -> None:
    names = report.metric_names
    header = "language".ljust(12) + "".join(name.rjust(10) for name in names)
    sys.stdout.write(header + "\n")
    for tag, stats in report.per_language.items():
        row = tag.ljust(12)
        for name in names:
            mean, _ = stats[name]
            row += ("-" if mean is None else _scale_two_decimals(mean)).rjust(10)
        sys.stdout.write(row + "\n")
    eng_row = "ENG".ljust(12)
    avg_row = "AVG".ljust(12)
    delta_row = "%delta".ljust(12)
    for name in names:
        eng = report.eng[name]
        avg = report.avg[name]
        delta = report.delta_percent[name]
        eng_row += ("-" if eng is None else _scale_two_decimals(eng)).rjust(10)
        avg_row += ("-" if avg is None else _scale_two_decimals(avg)).rjust(10)
        delta_row += ("-" if delta is None else f"{delta:.2f}").rjust(10)
    sys.stdout.write(eng_row + "\n" + avg_row + "\n" + delta_row + "\n")


def cmd_evaluate(args: argparse.Namespace, config: dict) -> int:
    behaviors_path = _require_path(config, "behaviors", args.behaviors, "--behaviors")
    impressions = io.parse_behaviors_tsv(behaviors_path)
    tag_paths = _parse_embedding_args(args.embeddings or [])
    if not tag_paths:
        raise UsageError("at least one --embeddings TAG=PATH is required")
    source = _eval_setting(config, "source_language", args.source_language, None)
    if source is None:
        raise UsageError("missing required --source-language (or eval.source_language in config)")
    if source not in tag_paths:
        raise UsageError(f"source language {source!r} has no --embeddings entry")
    tables = {tag: scoring.load_embeddings(path) for tag, path in tag_paths.items()}
    report = evaluation.run_xlt_eval(
        impressions,
        tables,
        source,
        max_history=int(_eval_setting(config, "max_history", args.max_history, 50)),
        cold_policy=_eval_setting(config, "cold_policy", args.cold_policy, "zero"),
        ndcg_ks=tuple(config.get("eval", {}).get("ndcg_ks", evaluation.DEFAULT_NDCG_KS)),
        threads=args.threads or os.cpu_count() or 1,
    )
    if args.report_json:
        report.write_json(args.report_json)
    if args.report_csv:
        report.write_csv(args.report_csv)
    _print_report(report)
    return 0


def cmd_select_checkpoint(args: argparse.Namespace, config: dict) -> int:
    behaviors_path = _require_path(config, "behaviors", args.behaviors, "--behaviors")
    impressions = io.parse_behaviors_tsv(behaviors_path)
    raw_languages = _eval_setting(config, "languages", args.languages, None)
    if raw_languages is None:
        raise UsageError("missing required --languages (or eval.languages in config)")
    languages = raw_languages.split(",") if isinstance(raw_languages, str) else list(raw_languages)
    source = _eval_setting(config, "source_language", args.source_language, None)
    if source is None:
        raise UsageError("missing required --source-language (or eval.source_language in config)")
    if source not in languages:
        raise UsageError(f"source language {source!r} is not among --languages")
    if not args.checkpoint:
        raise UsageError("at least one --checkpoint DIR is required")
    checkpoints = [
        (Path(directory).name, evaluation.load_checkpoint_tables(directory, languages))
        for directory in args.checkpoint
    ]
    selection = evaluation.checkpoint_select(
        checkpoints,
        impressions,
        source,
        max_history=int(_eval_setting(config, "max_history", args.max_history, 50)),
        cold_policy=_eval_setting(config, "cold_policy", args.cold_policy, "zero"),
        threads=args.threads or os.cpu_count() or 1,
    )
    for checkpoint_id, mean in selection.mean_ndcg10.items():
        sys.stdout.write(f"{checkpoint_id}\tmean_ndcg@10\t{_scale_two_decimals(mean)}\n")
    sys.stdout.write(f"best\t{selection.best_id}\n")
    if args.output:
        payload = {
            "best": selection.best_id,
            "mean_ndcg10": selection.mean_ndcg10,
            "per_language_ndcg10": selection.per_language_ndcg10,
        }
        Path(args.output).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_fewshot_export(args: argparse.Namespace, config: dict) -> int:
    behaviors_path = _require_path(config, "behaviors", args.behaviors, "--behaviors")
    impressions = io.parse_behaviors_tsv(behaviors_path)
    if args.n is None:
        raise UsageError("missing required --n")
    seed = args.seed if args.seed is not None else 0
    subset, tuples = evaluation.fewshot_export(impressions, args.n, seed, args.negatives)
    output_path = _require_path(config, "output", args.output, "--output")
    io.write_behaviors_tsv(subset, output_path)
    if tuples is not None:
        if not args.tuples:
            raise UsageError("--negatives requires --tuples PATH for the training tuples")
        with open(args.tuples, "w", encoding="utf-8", newline="\n") as handle:
            for row in tuples:
                handle.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="newsxlt", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=int, help="seed for all randomized steps")
    common.add_argument("--threads", type=int, help="worker threads (default: available parallelism)")
    common.add_argument("--dry-run", action="store_true", help="validate and report without writing outputs")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", parents=[common], help="run the cleaning pipeline on a JSONL corpus")
    p.add_argument("--input", help="news or parallel JSONL (autodetected)")
    p.add_argument("--output", help="cleaned JSONL destination")
    p.add_argument("--stats", help="stats JSON destination (default: stdout)")
    p.add_argument("--lid-labels", help="TSV id<TAB>iso639_3 external language predictions")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("corpus-stats", parents=[common], help="per-language count/length statistics")
    p.add_argument("--input", help="news JSONL")
    p.add_argument("--output", help="stats JSON destination (default: stdout)")
    p.set_defaults(func=cmd_corpus_stats)

    p = sub.add_parser("sample-export", parents=[common], help="generate seq2seq training examples")
    p.add_argument("--mono", help="mono news JSONL")
    p.add_argument("--parallel", help="parallel JSONL")
    p.add_argument("--output", help="seq2seq JSONL destination")
    p.add_argument("--mode", choices=sampler.MODES)
    p.add_argument("--n", type=int, help="number of examples")
    p.add_argument("--alpha", type=float, help="temperature exponent")
    p.add_argument("--min-count", type=int, dest="min_count")
    p.add_argument("--ratio", type=float, help="token deletion ratio")
    p.add_argument("--phase-split", type=float, dest="phase_split")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.set_defaults(func=cmd_sample_export)

    p = sub.add_parser("validate-embeddings", parents=[common], help="check embedding coverage of a behavior log")
    p.add_argument("--behaviors", help="behaviors TSV")
    p.add_argument("--embeddings", action="append", metavar="TAG=PATH")
    p.add_argument("--max-history", type=int, dest="max_history")
    p.set_defaults(func=cmd_validate_embeddings)

    p = sub.add_parser("evaluate", parents=[common], help="zero-shot cross-lingual evaluation")
    p.add_argument("--behaviors", help="behaviors TSV")
    p.add_argument("--embeddings", action="append", metavar="TAG=PATH")
    p.add_argument("--source-language", dest="source_language")
    p.add_argument("--max-history", type=int, dest="max_history")
    p.add_argument("--cold-policy", choices=("error", "zero"), dest="cold_policy")
    p.add_argument("--report-json", dest="report_json")
    p.add_argument("--report-csv", dest="report_csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select-checkpoint", parents=[common], help="pick the best checkpoint by mean nDCG@10")
    p.add_argument("--behaviors", help="behaviors TSV")
    p.add_argument("--checkpoint", action="append", metavar="DIR", help="checkpoint directory (repeatable, ordered)")
    p.add_argument("--languages", help="comma-separated language tags to evaluate")
    p.add_argument("--source-language", dest="source_language")
    p.add_argument("--max-history", type=int, dest="max_history")
    p.add_argument("--cold-policy", choices=("error", "zero"), dest="cold_policy")
    p.add_argument("--output", help="selection JSON destination")
    p.set_defaults(func=cmd_select_checkpoint)

    p = sub.add_parser("fewshot-export", parents=[common], help="subsample impressions for few-shot training")
    p.add_argument("--behaviors", help="behaviors TSV")
    p.add_argument("--n", type=int, help="number of impressions to keep")
    p.add_argument("--output", help="subsampled behaviors TSV destination")
    p.add_argument("--negatives", type=int, help="negatives per positive for training tuples")
    p.add_argument("--tuples", help="training tuples JSONL destination")
    p.set_defaults(func=cmd_fewshot_export)
    return parser


def _configure_logging() -> None:
    raw = os.environ.get("NEWSXLT_LOG", "warn")
    level = _LOG_LEVELS.get(raw)
    if level is None:
        raise UsageError(f"NEWSXLT_LOG must be one of {sorted(_LOG_LEVELS)}, got {raw!r}")
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        _configure_logging()
        parser = _build_parser()
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except scoring.CoverageError as exc:
        print(f"coverage error: {exc}", file=sys.stderr)
        return 2
    except (io.FormatError, OSError, ValueError, ConnectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
