"""Multilingual news corpus cleaning, sampling, scoring and evaluation."""

from .evaluation import (
    CheckpointSelection,
    EvalReport,
    checkpoint_select,
    fewshot_export,
    run_xlt_eval,
    split_by_day,
)
from .minhash import estimated_jaccard, kernel_name, minhash_signature
from .pipeline import PipelineConfig, PipelineStats, run_parallel_pipeline, run_pipeline
from .sampler import SamplerConfig, language_weights, sample_texts, schedule_examples
from .scoring import CoverageError, EmbeddingTable, load_embeddings, score_impression
from .types import Corpus, Impression, LanguageKey, NewsText, ParallelPair, Seq2SeqExample

__version__ = "0.1.0"

__all__ = [
    "CheckpointSelection",
    "Corpus",
    "CoverageError",
    "EmbeddingTable",
    "EvalReport",
    "Impression",
    "LanguageKey",
    "NewsText",
    "ParallelPair",
    "PipelineConfig",
    "PipelineStats",
    "SamplerConfig",
    "Seq2SeqExample",
    "checkpoint_select",
    "estimated_jaccard",
    "fewshot_export",
    "kernel_name",
    "language_weights",
    "load_embeddings",
    "minhash_signature",
    "run_parallel_pipeline",
    "run_pipeline",
    "run_xlt_eval",
    "sample_texts",
    "schedule_examples",
    "score_impression",
    "split_by_day",
    "__version__",
]
