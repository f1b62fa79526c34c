"""
Generation Module
Generator gateway over OpenAI-compatible endpoints and a scripted backend.
"""

from .models import (
    EndpointConfig,
    EndpointKind,
    EndpointPool,
    FinishReason,
    GenerationOutput,
    GenParams,
    TokenLogprob,
    TopLogprob,
    scripted_output,
    split_pieces,
)
from .client import (
    GeneratorBackendError,
    GeneratorCapabilityError,
    GeneratorError,
    GeneratorTransportError,
    OpenAICompatibleClient,
)
from .scripted import MatcherKind, ScriptedGenerator, ScriptMissError, ScriptRegistrationError, load_script
from .gateway import (
    FLOOR_PROBABILITY,
    EndpointResolutionError,
    Generator,
    GeneratorGateway,
    candidate_probability,
    find_position,
    is_degraded,
    normalize,
)

__all__ = [
    # Models
    "EndpointConfig",
    "EndpointKind",
    "EndpointPool",
    "FinishReason",
    "GenerationOutput",
    "GenParams",
    "TokenLogprob",
    "TopLogprob",
    "scripted_output",
    "split_pieces",
    # Client
    "GeneratorBackendError",
    "GeneratorCapabilityError",
    "GeneratorError",
    "GeneratorTransportError",
    "OpenAICompatibleClient",
    # Scripted
    "MatcherKind",
    "ScriptedGenerator",
    "ScriptMissError",
    "ScriptRegistrationError",
    "load_script",
    # Gateway
    "FLOOR_PROBABILITY",
    "EndpointResolutionError",
    "Generator",
    "GeneratorGateway",
    "candidate_probability",
    "find_position",
    "is_degraded",
    "normalize",
]
