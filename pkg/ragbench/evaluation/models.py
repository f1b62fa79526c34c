"""
Evaluation Models
Benchmark items, dataset key maps, presets and evaluation reports.
"""

import hashlib
import json
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ragbench.algorithms.models import TrackSummary


# =============================================================================
# Items
# =============================================================================

class Choice(BaseModel):
    """One labeled multiple-choice option"""
    model_config = ConfigDict(frozen=True)

    label: str
    text: str


class BenchmarkItem(BaseModel):
    """Normalized record every dataset adapter produces"""
    model_config = ConfigDict(frozen=True)

    id: str
    question: str
    answers: List[str] = Field(..., min_length=1)
    choices: Optional[List[Choice]] = None
    short_answers: Optional[List[List[str]]] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("choices")
    @classmethod
    def _unique_labels(cls, value: Optional[List[Choice]]) -> Optional[List[Choice]]:
        if value is not None:
            labels = [c.label for c in value]
            if len(set(labels)) != len(labels):
                raise ValueError(f"choice labels must be unique, got {labels}")
        return value

    def bindings(self) -> Dict[str, Any]:
        """Template bindings beyond the query itself"""
        return {"choices": self.choices} if self.choices else {}


class KeyMap(BaseModel):
    """
    Where each BenchmarkItem field lives in a source record.

    Keys are dotted paths; a `*` segment maps over a list, e.g.
    "qa_pairs.*.short_answers".
    """
    question_key: str = "question"
    answers_key: str = "answers"
    choices_key: Optional[str] = None
    id_key: Optional[str] = None
    short_answers_key: Optional[str] = None
    bool_labels: Tuple[str, str] = ("true", "false")


# =============================================================================
# Presets
# =============================================================================

METRIC_NAMES = ("accuracy", "em", "f1", "rouge_l", "str_em", "str_hit")


class BenchmarkPreset(BaseModel):
    """Per-benchmark inference parameters and metric set"""
    name: str
    keymap: KeyMap = Field(default_factory=KeyMap)
    metrics: List[str] = Field(default_factory=lambda: ["accuracy"])
    max_new_tokens: int = Field(300, ge=1)
    n_docs: int = Field(10, ge=1)
    task_instruction: Optional[str] = None

    @field_validator("metrics")
    @classmethod
    def _known_metrics(cls, value: List[str]) -> List[str]:
        unknown = [m for m in value if m not in METRIC_NAMES]
        if unknown:
            raise ValueError(f"unknown metric(s) {unknown}; expected any of {list(METRIC_NAMES)}")
        if not value:
            raise ValueError("at least one metric is required")
        return value

    @model_validator(mode="after")
    def _default_task(self) -> "BenchmarkPreset":
        if self.task_instruction is None:
            self.task_instruction = self.name
        return self


# =============================================================================
# Reports
# =============================================================================

def canonical_digest(value: Any) -> str:
    """sha256 over the canonical JSON of a value"""
    payload = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class AlignmentFingerprint(BaseModel):
    """Per-component digests of everything shared across compared algorithms"""
    model_config = ConfigDict(frozen=True)

    components: Dict[str, str]
    digest: str

    @classmethod
    def from_components(cls, parts: Dict[str, Any]) -> "AlignmentFingerprint":
        components = {name: canonical_digest(value) for name, value in sorted(parts.items())}
        return cls(components=components, digest=canonical_digest(components))

    def differing(self, other: "AlignmentFingerprint") -> List[str]:
        names = sorted(set(self.components) | set(other.components))
        return [n for n in names if self.components.get(n) != other.components.get(n)]


class ItemRecord(BaseModel):
    """Per-item result line of items.jsonl"""
    index: int
    item_id: str
    question: str
    answer: Optional[str] = None
    scores: Dict[str, float] = Field(default_factory=dict)
    track: Optional[TrackSummary] = None
    error: Optional[str] = None

    @property
    def errored(self) -> bool:
        return self.error is not None


class EvalReport(BaseModel):
    """Outcome of one evaluate_run"""
    run_id: str
    algorithm: str
    benchmark: str
    fingerprint: AlignmentFingerprint
    config: Dict[str, Any] = Field(default_factory=dict)
    records: List[ItemRecord] = Field(default_factory=list)
    aggregates: Dict[str, float] = Field(default_factory=dict)
    items: int = 0
    scored: int = 0
    errored: int = 0

    def summary(self) -> Dict[str, Any]:
        """report.json content (records live in items.jsonl)"""
        return self.model_dump(mode="json", exclude={"records"})
