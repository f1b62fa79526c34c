"""
Algorithm Models
Per-algorithm configuration and the GenerationTrack every inference returns.
"""

from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ragbench.generation.models import GenerationOutput, GenParams
from ragbench.retrieval.models import Passage


# =============================================================================
# Enums
# =============================================================================

class InferenceMode(str, Enum):
    """How inference() is driven"""
    INTERACT = "interact"
    EVALUATION = "evaluation"


class SelfRagMode(str, Enum):
    """Self-RAG retrieval policy"""
    ALWAYS = "always"
    ADAPTIVE = "adaptive"
    NO = "no"


# =============================================================================
# Configuration
# =============================================================================

class IterRetGenConfig(BaseModel):
    max_iteration: int = Field(3, ge=1)


class SelfAskConfig(BaseModel):
    max_iteration: int = Field(5, ge=1)
    follow_up_marker: str = "Follow up:"
    intermediate_marker: str = "Intermediate answer:"
    final_marker: str = "So the final answer is:"
    intermediate_instruction: str = "self_ask_intermediate"


class ActiveRagConfig(BaseModel):
    filter_prob: float = Field(0.8, ge=0.0, le=1.0)
    masked_prob: float = Field(0.4, ge=0.0, le=1.0)
    query_formulation: Literal["implicit"] = "implicit"
    max_answer_sentences: int = Field(16, ge=1)
    retrieved_instruction: str = "active_rag_retrieved"


class RrrConfig(BaseModel):
    rewriter_role: Optional[str] = None
    rewrite_instruction: str = "rrr_rewrite"


class ReflectionVocab(BaseModel):
    """Reflection tokens as the served model spells them"""
    retrieval: str = "[Retrieval]"
    no_retrieval: str = "[No Retrieval]"
    relevant: str = "[Relevant]"
    irrelevant: str = "[Irrelevant]"
    fully_supported: str = "[Fully supported]"
    partially_supported: str = "[Partially supported]"
    no_support: str = "[No support / Contradictory]"
    utility: List[str] = Field(default_factory=lambda: [f"[Utility:{grade}]" for grade in range(1, 6)])
    paragraph_open: str = "<paragraph>"
    paragraph_close: str = "</paragraph>"

    @field_validator("utility")
    @classmethod
    def _five_grades(cls, value: List[str]) -> List[str]:
        if len(value) != 5:
            raise ValueError("utility needs exactly five grade tokens (1..5)")
        return value

    @property
    def support(self) -> List[str]:
        return [self.fully_supported, self.partially_supported, self.no_support]

    def all_tokens(self) -> List[str]:
        return [
            self.retrieval, self.no_retrieval, self.relevant, self.irrelevant,
            *self.support, *self.utility, self.paragraph_open, self.paragraph_close,
        ]


class SelfRagConfig(BaseModel):
    mode: SelfRagMode = SelfRagMode.ADAPTIVE
    beam_width: int = Field(2, ge=1)
    max_depth: int = Field(7, ge=1)
    w_rel: float = Field(1.0, ge=0.0)
    w_sup: float = Field(1.0, ge=0.0)
    w_use: float = Field(0.5, ge=0.0)
    threshold: float = Field(0.2, ge=0.0, le=1.0)
    vocab: ReflectionVocab = Field(default_factory=ReflectionVocab)


class AlgorithmConfig(BaseModel):
    """
    Settings shared by every algorithm plus per-algorithm sections.

    Keys match the YAML config: rag.n_docs, rag.self_rag.beam_width, ...
    """
    n_docs: int = Field(10, ge=1)
    generation: GenParams = Field(default_factory=GenParams)
    system_instruction: Optional[str] = "default"
    task_instruction: str = "popqa"
    algorithm_instruction: Optional[str] = None
    generator_role: str = "default"

    iter_retgen: IterRetGenConfig = Field(default_factory=IterRetGenConfig)
    self_ask: SelfAskConfig = Field(default_factory=SelfAskConfig)
    active_rag: ActiveRagConfig = Field(default_factory=ActiveRagConfig)
    self_rag: SelfRagConfig = Field(default_factory=SelfRagConfig)
    rrr: RrrConfig = Field(default_factory=RrrConfig)


# =============================================================================
# Track
# =============================================================================

class RetrievalStep(BaseModel):
    type: Literal["retrieval"] = "retrieval"
    query: str
    k: int
    passages: List[Passage] = Field(default_factory=list)
    cache_hit: bool = False


class GenerationStep(BaseModel):
    type: Literal["generation"] = "generation"
    prompt: str
    output: GenerationOutput
    role: str = "default"


class DecisionStep(BaseModel):
    type: Literal["decision"] = "decision"
    kind: str
    inputs: Dict[str, Any] = Field(default_factory=dict)
    value: Any = None


TrackStep = Annotated[Union[RetrievalStep, GenerationStep, DecisionStep], Field(discriminator="type")]


class TrackSummary(BaseModel):
    """Compact per-item view written into evaluation records"""
    model_config = ConfigDict(frozen=True)

    retrievals: int
    generations: int
    decisions: int
    passage_ids: List[int]


class GenerationTrack(BaseModel):
    """Ordered record of one inference"""
    steps: List[TrackStep] = Field(default_factory=list)
    answer: Optional[str] = None

    def add(self, step: Union[RetrievalStep, GenerationStep, DecisionStep]) -> None:
        self.steps.append(step)

    @property
    def retrievals(self) -> List[RetrievalStep]:
        return [s for s in self.steps if isinstance(s, RetrievalStep)]

    @property
    def generations(self) -> List[GenerationStep]:
        return [s for s in self.steps if isinstance(s, GenerationStep)]

    def decisions(self, kind: Optional[str] = None) -> List[DecisionStep]:
        return [s for s in self.steps if isinstance(s, DecisionStep) and (kind is None or s.kind == kind)]

    def retrieved_passage_ids(self) -> List[int]:
        """Distinct passage ids in first-retrieved order"""
        seen: Dict[int, None] = {}
        for step in self.retrievals:
            for passage in step.passages:
                seen.setdefault(passage.id, None)
        return list(seen)

    def summary(self) -> TrackSummary:
        return TrackSummary(
            retrievals=len(self.retrievals),
            generations=len(self.generations),
            decisions=len(self.decisions()),
            passage_ids=self.retrieved_passage_ids(),
        )

    def shape(self) -> List[str]:
        return [s.type for s in self.steps]
