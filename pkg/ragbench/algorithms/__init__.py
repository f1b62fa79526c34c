"""
Algorithms Module
The seven inference strategies over the shared retriever, generator gateway
and instruction store.
"""

from typing import Dict, List, Optional, Type

from ragbench.errors import ConfigError
from ragbench.generation.gateway import GeneratorGateway
from ragbench.instructions.lab import InstructionStore
from ragbench.retrieval.client import Retriever

from .models import (
    ActiveRagConfig,
    AlgorithmConfig,
    DecisionStep,
    GenerationStep,
    GenerationTrack,
    InferenceMode,
    IterRetGenConfig,
    ReflectionVocab,
    RetrievalStep,
    RrrConfig,
    SelfAskConfig,
    SelfRagConfig,
    SelfRagMode,
    TrackSummary,
)
from .segment import DEFAULT_ABBREVIATIONS, sentence_segment
from .naive import InferenceError, NaiveRag
from .direct import DirectGeneration
from .rrr import RewriteRetrieveRead
from .iter_retgen import IterRetGen
from .self_ask import SelfAsk
from .active_rag import ActiveRag, first_sentence, implicit_query, is_low_confidence
from .self_rag import Beam, Critique, SelfRag, critique_score, select_beams

ALGORITHMS: Dict[str, Type[NaiveRag]] = {
    cls.name: cls
    for cls in (DirectGeneration, NaiveRag, RewriteRetrieveRead, IterRetGen, SelfAsk, ActiveRag, SelfRag)
}


def algorithm_names() -> List[str]:
    return list(ALGORITHMS)


def get_algorithm_class(name: str) -> Type[NaiveRag]:
    try:
        return ALGORITHMS[name]
    except KeyError:
        raise ConfigError(
            f"unknown algorithm {name!r}",
            fields=[f"algorithm: choose one of {algorithm_names()}"],
        ) from None


def create_algorithm(
    name: str,
    config: AlgorithmConfig,
    gateway: GeneratorGateway,
    retriever: Optional[Retriever],
    instructions: InstructionStore,
) -> NaiveRag:
    """Instantiate an algorithm by registry name"""
    return get_algorithm_class(name)(config, gateway, retriever, instructions)


__all__ = [
    # Models
    "ActiveRagConfig",
    "AlgorithmConfig",
    "DecisionStep",
    "GenerationStep",
    "GenerationTrack",
    "InferenceMode",
    "IterRetGenConfig",
    "ReflectionVocab",
    "RetrievalStep",
    "RrrConfig",
    "SelfAskConfig",
    "SelfRagConfig",
    "SelfRagMode",
    "TrackSummary",
    # Segmentation
    "DEFAULT_ABBREVIATIONS",
    "sentence_segment",
    # Algorithms
    "InferenceError",
    "NaiveRag",
    "DirectGeneration",
    "RewriteRetrieveRead",
    "IterRetGen",
    "SelfAsk",
    "ActiveRag",
    "SelfRag",
    # Algorithm helpers
    "first_sentence",
    "implicit_query",
    "is_low_confidence",
    "Beam",
    "Critique",
    "critique_score",
    "select_beams",
    # Registry
    "ALGORITHMS",
    "algorithm_names",
    "create_algorithm",
    "get_algorithm_class",
]
