"""
Evaluation Module
Benchmark loading, metrics, presets, training-data prep and the aligned
evaluation harness.
"""

from .models import (
    METRIC_NAMES,
    AlignmentFingerprint,
    BenchmarkItem,
    BenchmarkPreset,
    Choice,
    EvalReport,
    ItemRecord,
    KeyMap,
    canonical_digest,
)
from .metrics import (
    ITEM_METRICS,
    MetricInputError,
    answer_tokens,
    metric_accuracy,
    metric_choice_accuracy,
    metric_em,
    metric_f1,
    metric_rouge_l,
    metric_str_em,
    metric_str_hit,
    normalize_text,
    score_item,
)
from .datasets import DatasetError, adapt_record, load_dataset, sample_sequential
from .presets import get_preset, load_presets
from .prep import default_special_tokens, load_token_list, prep_file, strip_special_tokens
from .harness import (
    AlignmentError,
    aggregate,
    alignment_fingerprint,
    apply_preset,
    evaluate_batch,
    evaluate_run,
    load_journal,
)

__all__ = [
    # Models
    "METRIC_NAMES",
    "AlignmentFingerprint",
    "BenchmarkItem",
    "BenchmarkPreset",
    "Choice",
    "EvalReport",
    "ItemRecord",
    "KeyMap",
    "canonical_digest",
    # Metrics
    "ITEM_METRICS",
    "MetricInputError",
    "answer_tokens",
    "metric_accuracy",
    "metric_choice_accuracy",
    "metric_em",
    "metric_f1",
    "metric_rouge_l",
    "metric_str_em",
    "metric_str_hit",
    "normalize_text",
    "score_item",
    # Datasets
    "DatasetError",
    "adapt_record",
    "load_dataset",
    "sample_sequential",
    # Presets / prep
    "get_preset",
    "load_presets",
    "default_special_tokens",
    "load_token_list",
    "prep_file",
    "strip_special_tokens",
    # Harness
    "AlignmentError",
    "aggregate",
    "alignment_fingerprint",
    "apply_preset",
    "evaluate_batch",
    "evaluate_run",
    "load_journal",
]
