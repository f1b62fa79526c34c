"""
Scripted Generator
Deterministic generator backend for tests and dry runs: responses are looked
up in a script table instead of being sampled from a model.

Matching order: exact prompt, then the longest registered substring contained
in the prompt, then the ordinal position of the call.
"""

import difflib
import threading
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from loguru import logger

from ragbench.errors import ConfigError

from .client import GeneratorError
from .models import FinishReason, GenerationOutput, GenParams, scripted_output


class ScriptRegistrationError(GeneratorError):
    """Matcher collides with an existing one"""
    pass


class ScriptMissError(GeneratorError):
    """No registered matcher applies to the prompt"""

    def __init__(self, message: str, closest: Optional[List[str]] = None):
        super().__init__(message)
        self.closest = closest or []


class MatcherKind(str, Enum):
    EXACT = "exact"
    SUBSTRING = "substring"
    ORDINAL = "ordinal"


class ScriptedGenerator:
    """
    Script-table generator.

    Usage:
        gen = ScriptedGenerator()
        gen.register_script(MatcherKind.EXACT, "Q: hi", GenerationOutput.from_text("hello"))
        gen.register_sequence(["first", "second"])
        output = await gen.complete("Q: hi", GenParams())
    """

    def __init__(self, default: Optional[GenerationOutput] = None):
        self.default = default
        self._exact: Dict[str, GenerationOutput] = {}
        self._substring: List[Tuple[str, GenerationOutput]] = []
        self._ordinal: Dict[int, GenerationOutput] = {}
        self._calls = 0
        self._lock = threading.Lock()
        self.prompts: List[str] = []

    @property
    def call_count(self) -> int:
        return self._calls

    # =========================================================================
    # Registration
    # =========================================================================

    def register_script(
        self,
        kind: Union[MatcherKind, str],
        matcher: Union[str, int],
        response: Union[GenerationOutput, str],
    ) -> None:
        """
        Register one response.

        Args:
            kind: exact | substring | ordinal
            matcher: Prompt text, substring, or zero-based call index
            response: Output (plain strings become stop-terminated outputs)

        Raises:
            ScriptRegistrationError: Duplicate matcher
        """
        kind = MatcherKind(kind)
        if isinstance(response, str):
            response = GenerationOutput.from_text(response)

        with self._lock:
            if kind == MatcherKind.EXACT:
                if matcher in self._exact:
                    raise ScriptRegistrationError(f"duplicate exact matcher: {str(matcher)[:80]!r}")
                self._exact[str(matcher)] = response
            elif kind == MatcherKind.SUBSTRING:
                if not matcher:
                    raise ScriptRegistrationError("substring matcher must be non-empty")
                if any(existing == matcher for existing, _ in self._substring):
                    raise ScriptRegistrationError(f"duplicate substring matcher: {str(matcher)[:80]!r}")
                self._substring.append((str(matcher), response))
            else:
                position = int(matcher)
                if position < 0 or position in self._ordinal:
                    raise ScriptRegistrationError(f"invalid or duplicate ordinal matcher: {position}")
                self._ordinal[position] = response

    def register_sequence(self, responses: Sequence[Union[GenerationOutput, str]], start: int = 0) -> None:
        """Ordinal matchers for calls start, start+1, ..."""
        for offset, response in enumerate(responses):
            self.register_script(MatcherKind.ORDINAL, start + offset, response)

    def _describe_matchers(self) -> List[str]:
        names = [f"exact:{p}" for p in self._exact]
        names += [f"substring:{s}" for s, _ in self._substring]
        names += [f"ordinal:{i}" for i in sorted(self._ordinal)]
        return names

    def _closest(self, prompt: str, n: int = 3) -> List[str]:
        def similarity(name: str) -> float:
            body = name.split(":", 1)[1]
            return difflib.SequenceMatcher(None, prompt, body).ratio()

        ranked = sorted(self._describe_matchers(), key=lambda name: -similarity(name))
        return ranked[:n]

    # =========================================================================
    # Completion
    # =========================================================================

    def _lookup(self, prompt: str, call_index: int) -> GenerationOutput:
        if prompt in self._exact:
            return self._exact[prompt]
        matches = [(s, r) for s, r in self._substring if s in prompt]
        if matches:
            # longest substring wins; registration order breaks ties
            return max(matches, key=lambda m: len(m[0]))[1]
        if call_index in self._ordinal:
            return self._ordinal[call_index]
        if self.default is not None:
            return self.default
        closest = self._closest(prompt)
        raise ScriptMissError(
            f"No scripted response for call {call_index} (prompt {prompt[:80]!r}); closest matchers: {closest}",
            closest=closest,
        )

    @staticmethod
    def _apply_limits(output: GenerationOutput, params: GenParams) -> GenerationOutput:
        """Honor stop sequences and max_new_tokens the way a server would"""
        text = output.text
        tokens = list(output.tokens)
        finish = output.finish_reason

        cut = min((i for i in (text.find(s) for s in params.stop if s) if i >= 0), default=-1)
        if cut >= 0:
            text = text[:cut]
            finish = FinishReason.STOP
            if tokens:
                kept, consumed = [], 0
                for tok in tokens:
                    if consumed >= cut:
                        break
                    room = cut - consumed
                    kept.append(tok if len(tok.token) <= room else tok.model_copy(update={"token": tok.token[:room]}))
                    consumed += len(tok.token)
                tokens = kept

        if tokens and len(tokens) > params.max_new_tokens:
            tokens = tokens[: params.max_new_tokens]
            text = "".join(t.token for t in tokens)
            finish = FinishReason.LENGTH

        if text == output.text and finish == output.finish_reason and len(tokens) == len(output.tokens):
            return output
        return GenerationOutput(text=text, tokens=tuple(tokens), finish_reason=finish)

    async def complete(self, prompt: str, params: GenParams) -> GenerationOutput:
        with self._lock:
            call_index = self._calls
            self._calls += 1
            self.prompts.append(prompt)
            output = self._lookup(prompt, call_index)
        logger.debug(f"Scripted call {call_index}: {len(prompt)} chars -> {output.text[:40]!r}")
        return self._apply_limits(output, params)

    async def close(self) -> None:
        return None


# =============================================================================
# Script Files
# =============================================================================

def _response(entry: Dict[str, Any]) -> GenerationOutput:
    return scripted_output(
        entry.get("tokens") or str(entry.get("text", "")),
        probs=entry.get("probs"),
        alternatives={int(k): v for k, v in (entry.get("alternatives") or {}).items()},
        finish_reason=FinishReason(entry.get("finish_reason", "stop")),
    )


def load_script(path: Union[str, Path]) -> ScriptedGenerator:
    """
    Scripted generator from a YAML script file.

    Format:
        default: {text: "..."}              # optional fallback response
        responses:
          - substring: "Question: Who"      # or exact: / ordinal:
            text: " Paris"
            probs: [0.9]                    # optional, one per token
            alternatives: {0: {" Rome": 0.05}}

    Raises:
        ConfigError: Unreadable file or malformed entry
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read generator script {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: script must be a mapping with 'responses'")

    try:
        default = raw.get("default")
        if isinstance(default, str):
            default = {"text": default}
        generator = ScriptedGenerator(default=_response(default) if default else None)
        for i, entry in enumerate(raw.get("responses") or []):
            kinds = [k for k in MatcherKind if k.value in entry]
            if len(kinds) != 1:
                raise ConfigError(f"{path}: responses[{i}] needs exactly one of exact/substring/ordinal")
            generator.register_script(kinds[0], entry[kinds[0].value], _response(entry))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}: invalid script entry: {e}") from e
    logger.info(f"Loaded generator script {path} ({len(generator._describe_matchers())} matchers)")
    return generator
