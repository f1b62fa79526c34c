"""
Generator Gateway
Uniform generator interface: algorithms ask for a role, the gateway routes the
call to the endpoint serving it and enforces the shared output contract.
"""

import math
from typing import Dict, Mapping, Optional, Protocol, Sequence, runtime_checkable

from loguru import logger

from ragbench.errors import ConfigError

from .client import GeneratorCapabilityError, GeneratorError, OpenAICompatibleClient
from .models import EndpointConfig, EndpointKind, EndpointPool, GenerationOutput, GenParams
from .scripted import ScriptedGenerator, load_script

FLOOR_PROBABILITY = 1e-10


class EndpointResolutionError(ConfigError):
    """A role or endpoint cannot be resolved"""
    pass


@runtime_checkable
class Generator(Protocol):
    """Anything that turns a prompt into a GenerationOutput"""

    async def complete(self, prompt: str, params: GenParams) -> GenerationOutput:
        ...


def create_backend(config: EndpointConfig) -> Generator:
    if config.kind == EndpointKind.SCRIPTED:
        return load_script(config.script_path) if config.script_path else ScriptedGenerator()
    return OpenAICompatibleClient(config)


class GeneratorGateway:
    """
    Role-routed access to generator backends.

    Usage:
        gateway = GeneratorGateway(pool)
        output = await gateway.complete(prompt, GenParams(logprobs_top_k=5), role="default")
    """

    def __init__(self, pool: Optional[EndpointPool] = None, backends: Optional[Mapping[str, Generator]] = None):
        self.pool = pool or EndpointPool()
        self.backends: Dict[str, Generator] = dict(backends or {})
        for name, config in self.pool.endpoints.items():
            if name not in self.backends:
                self.backends[name] = create_backend(config)

    @classmethod
    def single(cls, backend: Generator, name: str = "default") -> "GeneratorGateway":
        """Gateway with one backend serving the default role"""
        pool = EndpointPool(endpoints={name: EndpointConfig(kind=EndpointKind.SCRIPTED)}, roles={"default": name})
        return cls(pool, backends={name: backend})

    def backend_for(self, role: str = "default") -> Generator:
        try:
            name = self.pool.resolve(role)
        except KeyError as e:
            raise EndpointResolutionError(str(e)) from None
        return self.backends[name]

    def check_roles(self, roles: Sequence[str]) -> None:
        """Fail early if any role used by an algorithm is unassigned"""
        missing = [r for r in roles if r not in self.pool.roles]
        if missing:
            raise EndpointResolutionError(
                f"unassigned generator role(s): {missing}",
                fields=[f"generators.roles.{r}: not assigned" for r in missing],
            )

    def check_logprobs(self, role: str = "default") -> None:
        """
        Fail before any generation when the endpoint serving `role` declares no logprobs.

        Raises:
            GeneratorCapabilityError: Endpoint configured with logprobs: false
            EndpointResolutionError: Role is not assigned
        """
        try:
            name = self.pool.resolve(role)
        except KeyError as e:
            raise EndpointResolutionError(str(e)) from None
        if not self.pool.endpoints[name].logprobs:
            raise GeneratorCapabilityError(f"endpoint {name!r} for role {role!r} does not provide logprobs")

    def describe(self, role: str = "default") -> Dict[str, str]:
        """Endpoint identity for the alignment fingerprint"""
        name = self.pool.resolve(role)
        config = self.pool.endpoints[name]
        return {"endpoint": name, "kind": config.kind.value, "base_url": config.base_url or "", "model": config.model}

    async def complete(self, prompt: str, params: GenParams, role: str = "default") -> GenerationOutput:
        """
        Generate through the endpoint serving `role`.

        Raises:
            GeneratorCapabilityError: Logprobs requested but not returned
            GeneratorError: Transport or backend failure
        """
        if not prompt:
            raise GeneratorError("prompt must be non-empty")
        backend = self.backend_for(role)
        output = await backend.complete(prompt, params)
        if params.logprobs_top_k > 0 and output.text and not output.tokens:
            raise GeneratorCapabilityError(f"endpoint for role {role!r} returned no logprobs")
        logger.debug(f"[{role}] {len(prompt)} chars -> {len(output.text)} chars ({output.finish_reason.value})")
        return output

    async def close(self) -> None:
        for backend in self.backends.values():
            close = getattr(backend, "close", None)
            if close is not None:
                await close()


# =============================================================================
# Candidate Probabilities
# =============================================================================

def candidate_probability(output: GenerationOutput, position: int, candidates: Sequence[str]) -> Dict[str, float]:
    """
    Probability of each candidate token at a generated position.

    Candidates missing from the top alternatives get FLOOR_PROBABILITY. Token
    text is compared after stripping surrounding whitespace.

    Raises:
        IndexError: Position outside the generated tokens
    """
    if not 0 <= position < len(output.tokens):
        raise IndexError(f"position {position} outside output of {len(output.tokens)} tokens")
    token = output.tokens[position]
    table: Dict[str, float] = {}
    for alt in token.top:
        table.setdefault(alt.token.strip(), math.exp(alt.logprob))
    table.setdefault(token.token.strip(), token.prob)
    return {c: table.get(c.strip(), FLOOR_PROBABILITY) for c in candidates}


def normalize(probabilities: Mapping[str, float]) -> Dict[str, float]:
    """Rescale to a distribution over the given keys"""
    total = sum(probabilities.values())
    if total <= 0:
        share = 1.0 / len(probabilities) if probabilities else 0.0
        return {k: share for k in probabilities}
    return {k: v / total for k, v in probabilities.items()}


def is_degraded(probabilities: Mapping[str, float]) -> bool:
    """True when any candidate fell back to the floor probability"""
    return any(v <= FLOOR_PROBABILITY for v in probabilities.values())


def find_position(output: GenerationOutput, vocabulary: Sequence[str]) -> Optional[int]:
    """First generated position whose token is one of `vocabulary`"""
    wanted = {v.strip() for v in vocabulary}
    for i, token in enumerate(output.tokens):
        if token.token.strip() in wanted:
            return i
    return None

