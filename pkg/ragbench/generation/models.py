"""
Generation Models
Decoding parameters, token log-probabilities, generator outputs and the
endpoint pool that routes algorithm roles to generator endpoints.
"""

import math
import re
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# =============================================================================
# Enums
# =============================================================================

class FinishReason(str, Enum):
    """Why the generator stopped"""
    STOP = "stop"
    LENGTH = "length"


class EndpointKind(str, Enum):
    """Generator backend type"""
    COMPLETIONS = "completions"
    CHAT = "chat"
    SCRIPTED = "scripted"


# =============================================================================
# Decoding
# =============================================================================

class GenParams(BaseModel):
    """Decoding controls; temperature 0 means greedy"""
    model_config = ConfigDict(frozen=True)

    max_new_tokens: int = Field(300, ge=1)
    temperature: float = Field(0.0, ge=0.0)
    seed: int = 0
    logprobs_top_k: int = Field(0, ge=0)
    stop: Tuple[str, ...] = ()

    @field_validator("stop", mode="before")
    @classmethod
    def _coerce_stop(cls, value):
        if value is None:
            return ()
        if isinstance(value, str):
            return (value,)
        return tuple(value)


class TopLogprob(BaseModel):
    """One alternative at a token position"""
    model_config = ConfigDict(frozen=True)

    token: str
    logprob: float = Field(..., le=0.0)


class TokenLogprob(BaseModel):
    """A generated token with its log probability and top alternatives"""
    model_config = ConfigDict(frozen=True)

    token: str
    logprob: float = Field(..., le=0.0)
    top: Tuple[TopLogprob, ...] = ()

    @field_validator("top", mode="after")
    @classmethod
    def _sort_alternatives(cls, value: Tuple[TopLogprob, ...]) -> Tuple[TopLogprob, ...]:
        return tuple(sorted(value, key=lambda alt: -alt.logprob))

    @property
    def prob(self) -> float:
        return math.exp(self.logprob)


class GenerationOutput(BaseModel):
    """Generator response"""
    model_config = ConfigDict(frozen=True)

    text: str
    tokens: Tuple[TokenLogprob, ...] = ()
    finish_reason: FinishReason = FinishReason.STOP

    @classmethod
    def from_text(cls, text: str, finish_reason: FinishReason = FinishReason.STOP) -> "GenerationOutput":
        return cls(text=text, finish_reason=finish_reason)

    @property
    def token_probs(self) -> List[float]:
        return [t.prob for t in self.tokens]


_PIECE_RE = re.compile(r"\s*\S+|\s+$")


def split_pieces(text: str) -> List[str]:
    """Whitespace-led pieces whose concatenation is exactly `text`"""
    return _PIECE_RE.findall(text)


def scripted_output(
    text: Union[str, Sequence[str]],
    probs: Optional[Sequence[float]] = None,
    alternatives: Optional[Dict[int, Dict[str, float]]] = None,
    finish_reason: FinishReason = FinishReason.STOP,
) -> GenerationOutput:
    """
    Build a GenerationOutput with per-token probabilities.

    Args:
        text: Output text, split into whitespace-led pieces (one token each),
            or an explicit token list whose concatenation is the text
        probs: Probability per piece (default 1.0 each)
        alternatives: position → {token: probability} top alternatives
        finish_reason: Reported finish reason
    """
    if isinstance(text, str):
        pieces = split_pieces(text)
    else:
        pieces = list(text)
        text = "".join(pieces)
    probs = list(probs) if probs is not None else [1.0] * len(pieces)
    if len(probs) != len(pieces):
        raise ValueError(f"{len(pieces)} tokens in {text!r} but {len(probs)} probabilities")
    alternatives = alternatives or {}
    tokens = []
    for i, (piece, p) in enumerate(zip(pieces, probs)):
        alts = alternatives.get(i, {})
        tokens.append(
            TokenLogprob(
                token=piece,
                logprob=_safe_log(p),
                top=tuple(TopLogprob(token=tok, logprob=_safe_log(ap)) for tok, ap in alts.items()),
            )
        )
    return GenerationOutput(text=text, tokens=tuple(tokens), finish_reason=finish_reason)


def _safe_log(p: float) -> float:
    if not 0.0 < p <= 1.0:
        raise ValueError(f"probability must be in (0, 1], got {p}")
    return min(math.log(p), 0.0)


# =============================================================================
# Endpoints
# =============================================================================

class EndpointConfig(BaseModel):
    """One named generator endpoint"""
    kind: EndpointKind = EndpointKind.COMPLETIONS
    base_url: Optional[str] = None
    model: str = ""
    api_key_env: Optional[str] = None
    timeout: float = 60.0
    script_path: Optional[str] = None
    # false for backends known not to return token log-probabilities
    logprobs: bool = True

    @model_validator(mode="after")
    def _require_url(self) -> "EndpointConfig":
        if self.kind != EndpointKind.SCRIPTED and not self.base_url:
            raise ValueError(f"{self.kind.value} endpoint requires base_url")
        return self


class EndpointPool(BaseModel):
    """Named endpoints plus role → endpoint assignment"""
    endpoints: Dict[str, EndpointConfig] = Field(default_factory=lambda: {"default": EndpointConfig(kind=EndpointKind.SCRIPTED)})
    roles: Dict[str, str] = Field(default_factory=lambda: {"default": "default"})

    @model_validator(mode="after")
    def _roles_resolve(self) -> "EndpointPool":
        for role, name in self.roles.items():
            if name not in self.endpoints:
                raise ValueError(f"role {role!r} references unknown endpoint {name!r}")
        return self

    def resolve(self, role: str) -> str:
        """Endpoint name serving a role"""
        try:
            return self.roles[role]
        except KeyError:
            raise KeyError(f"role {role!r} is not assigned; known roles: {sorted(self.roles)}") from None
