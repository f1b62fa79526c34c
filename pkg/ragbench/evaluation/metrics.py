"""
QA Metrics
Cover-match accuracy and exact match on SQuAD-normalized text, token F1 and
ROUGE-L on lowercased punctuation-free tokens, and the ASQA short-answer
coverage metrics (str-em / str-hit).
"""

import re
import string
from collections import Counter
from typing import Callable, Dict, List, Optional, Sequence

from ragbench.errors import RagBenchError

from .models import BenchmarkItem, Choice

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_PUNCTUATION = set(string.punctuation)


class MetricInputError(RagBenchError):
    """Metric called without the references it needs"""

    exit_code = 2


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, drop articles a/an/the, collapse whitespace"""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCTUATION)
    text = _ARTICLES_RE.sub(" ", text)
    return " ".join(text.split())


def answer_tokens(text: str) -> List[str]:
    """Lowercased, punctuation-free tokens; articles are kept as tokens"""
    return "".join(ch for ch in text.lower() if ch not in _PUNCTUATION).split()


# =============================================================================
# Short-form QA
# =============================================================================

def metric_accuracy(answer: str, golds: Sequence[str]) -> float:
    """1 iff some normalized gold is a substring of the normalized answer"""
    normalized = normalize_text(answer)
    return float(any(normalize_text(gold) in normalized for gold in golds))


def metric_em(answer: str, golds: Sequence[str]) -> float:
    """1 iff the normalized answer equals some normalized gold"""
    normalized = normalize_text(answer)
    return float(any(normalize_text(gold) == normalized for gold in golds))


def token_f1(prediction: str, reference: str) -> float:
    """Token-multiset F1; 0 when exactly one side is empty after normalization"""
    normalized_pred, normalized_ref = normalize_text(prediction), normalize_text(reference)
    if not normalized_pred or not normalized_ref:
        return float(normalized_pred == normalized_ref)
    pred_tokens = answer_tokens(prediction)
    ref_tokens = answer_tokens(reference)
    common = Counter(pred_tokens) & Counter(ref_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(ref_tokens)
    return (2 * precision * recall) / (precision + recall)


def metric_f1(answer: str, golds: Sequence[str]) -> float:
    """Max over golds of token-multiset F1; 1 whenever exact match holds"""
    if metric_em(answer, golds):
        return 1.0
    return max(token_f1(answer, gold) for gold in golds)


# =============================================================================
# Long-form QA
# =============================================================================

def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if x == y else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def metric_rouge_l(answer: str, reference: str) -> float:
    """LCS-based F-measure (beta = 1) on normalized tokens"""
    pred_tokens = answer_tokens(answer)
    ref_tokens = answer_tokens(reference)
    if not pred_tokens or not ref_tokens:
        return float(pred_tokens == ref_tokens)
    lcs = lcs_length(pred_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred_tokens)
    recall = lcs / len(ref_tokens)
    return (2 * precision * recall) / (precision + recall)


def metric_str_em(answer: str, short_answer_sets: Sequence[Sequence[str]]) -> float:
    """
    Fraction of required short answers with an alias present in the answer.

    Raises:
        MetricInputError: No short-answer sets
    """
    if not short_answer_sets:
        raise MetricInputError("str_em needs at least one short-answer set")
    normalized = normalize_text(answer)
    found = sum(1 for aliases in short_answer_sets if any(normalize_text(a) in normalized for a in aliases))
    return found / len(short_answer_sets)


def metric_str_hit(answer: str, short_answer_sets: Sequence[Sequence[str]]) -> float:
    """1 iff every required short answer is present"""
    return float(metric_str_em(answer, short_answer_sets) == 1.0)


# =============================================================================
# Multiple Choice
# =============================================================================

def resolve_choice(gold: str, choices: Sequence[Choice]) -> Optional[Choice]:
    """Choice named by a gold answer, matched by label first, then by text"""
    for choice in choices:
        if gold.strip().lower() == choice.label.lower():
            return choice
    for choice in choices:
        if normalize_text(gold) == normalize_text(choice.text):
            return choice
    return None


def choice_selected(answer: str, choice: Choice) -> bool:
    """Choice text as a normalized substring, or its label as a standalone token"""
    if normalize_text(choice.text) and normalize_text(choice.text) in normalize_text(answer):
        return True
    return re.search(rf"(?<![A-Za-z0-9]){re.escape(choice.label)}(?![A-Za-z0-9])", answer) is not None


def metric_choice_accuracy(answer: str, golds: Sequence[str], choices: Sequence[Choice]) -> float:
    """Accuracy for multiple-choice items; golds that name no choice fall back to cover-match"""
    for gold in golds:
        choice = resolve_choice(gold, choices)
        if choice is not None:
            if choice_selected(answer, choice):
                return 1.0
        elif metric_accuracy(answer, [gold]):
            return 1.0
    return 0.0


# =============================================================================
# Item Scoring
# =============================================================================

def _accuracy(answer: str, item: BenchmarkItem) -> float:
    if item.choices:
        return metric_choice_accuracy(answer, item.answers, item.choices)
    return metric_accuracy(answer, item.answers)


def _short_answers(item: BenchmarkItem) -> List[List[str]]:
    if not item.short_answers:
        raise MetricInputError(f"item {item.id} has no short answers for str_em/str_hit")
    return item.short_answers


ItemMetric = Callable[[str, BenchmarkItem], float]

ITEM_METRICS: Dict[str, ItemMetric] = {
    "accuracy": _accuracy,
    "em": lambda answer, item: metric_em(answer, item.answers),
    "f1": lambda answer, item: metric_f1(answer, item.answers),
    "rouge_l": lambda answer, item: max(metric_rouge_l(answer, ref) for ref in item.answers),
    "str_em": lambda answer, item: metric_str_em(answer, _short_answers(item)),
    "str_hit": lambda answer, item: metric_str_hit(answer, _short_answers(item)),
}


def score_item(answer: str, item: BenchmarkItem, metrics: Sequence[str]) -> Dict[str, float]:
    """Score one answer with the named metrics"""
    return {name: ITEM_METRICS[name](answer, item) for name in metrics}
