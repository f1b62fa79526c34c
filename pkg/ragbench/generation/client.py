"""
OpenAI-Compatible Generator Client
Speaks the completions subset (prompt, max_tokens, temperature, seed, logprobs,
stop) and, for chat-only servers, the chat-completions equivalent.

Works against closed APIs and common local servers (vLLM, llama.cpp, TGI).
"""

import asyncio
import math
import os
from datetime import datetime, timezone
from email.utils import parsedate_to_datetime
from typing import Any, Dict, List, Optional

import httpx
from loguru import logger

from ragbench.errors import RagBenchError

from .models import EndpointConfig, EndpointKind, FinishReason, GenerationOutput, GenParams, TokenLogprob, TopLogprob


class GeneratorError(RagBenchError):
    """Base exception for generator errors"""

    retryable = False

    def __init__(self, message: str, status_code: Optional[int] = None, response_body: Optional[dict] = None):
        super().__init__(message)
        self.status_code = status_code
        self.response_body = response_body or {}


class GeneratorTransportError(GeneratorError):
    """Network-level failure; safe to retry"""

    retryable = True


class GeneratorBackendError(GeneratorError):
    """Backend returned an error payload"""
    pass


class GeneratorCapabilityError(GeneratorError):
    """Backend cannot provide what the caller asked for (e.g. logprobs)"""
    pass


def parse_retry_after(value: Optional[str], default: float, now: Optional[datetime] = None) -> float:
    """
    Seconds to wait from a Retry-After header.

    Accepts delta-seconds or an HTTP date; anything unparseable yields `default`.
    """
    if not value:
        return default
    try:
        return max(0.0, float(value))
    except ValueError:
        pass
    try:
        when = parsedate_to_datetime(value)
    except (TypeError, ValueError, IndexError):
        return default
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return max(0.0, (when - (now or datetime.now(timezone.utc))).total_seconds())


class OpenAICompatibleClient:
    """
    Async client for one OpenAI-compatible endpoint.

    Usage:
        client = OpenAICompatibleClient(EndpointConfig(base_url="http://localhost:8000/v1", model="llama3-8b"))
        output = await client.complete("Q: capital of France?\\nA:", GenParams(max_new_tokens=16))
    """

    MAX_RETRIES = 3
    RETRY_BACKOFF_BASE = 1.0
    RETRY_BACKOFF_MAX = 30.0

    def __init__(self, config: EndpointConfig, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.config = config
        self.base_url = (config.base_url or "").rstrip("/")
        self._transport = transport
        self._client: Optional[httpx.AsyncClient] = None
        logger.info(f"Initialized generator client for {self.base_url} (model {config.model}, {config.kind.value})")

    def _api_key(self) -> Optional[str]:
        if not self.config.api_key_env:
            return None
        key = os.getenv(self.config.api_key_env)
        if not key:
            logger.warning(f"Environment variable {self.config.api_key_env} is empty")
        return key

    async def _get_client(self) -> httpx.AsyncClient:
        if self._client is None or self._client.is_closed:
            headers = {"Content-Type": "application/json", "Accept": "application/json"}
            key = self._api_key()
            if key:
                headers["Authorization"] = f"Bearer {key}"
            self._client = httpx.AsyncClient(
                base_url=self.base_url,
                timeout=httpx.Timeout(self.config.timeout),
                headers=headers,
                transport=self._transport,
            )
        return self._client

    async def close(self) -> None:
        if self._client and not self._client.is_closed:
            await self._client.aclose()
            self._client = None

    # =========================================================================
    # Request Building
    # =========================================================================

    def _build_body(self, prompt: str, params: GenParams) -> Dict[str, Any]:
        body: Dict[str, Any] = {
            "model": self.config.model,
            "max_tokens": params.max_new_tokens,
            "temperature": params.temperature,
            "seed": params.seed,
        }
        if params.stop:
            body["stop"] = list(params.stop)
        if self.config.kind == EndpointKind.CHAT:
            # system and task text are already folded into the prompt
            body["messages"] = [{"role": "user", "content": prompt}]
            if params.logprobs_top_k > 0:
                body["logprobs"] = True
                body["top_logprobs"] = params.logprobs_top_k
        else:
            body["prompt"] = prompt
            if params.logprobs_top_k > 0:
                body["logprobs"] = params.logprobs_top_k
        return body

    @property
    def _path(self) -> str:
        return "/chat/completions" if self.config.kind == EndpointKind.CHAT else "/completions"

    # =========================================================================
    # Response Parsing
    # =========================================================================

    @staticmethod
    def _finish(reason: Optional[str]) -> FinishReason:
        return FinishReason.LENGTH if reason == "length" else FinishReason.STOP

    @staticmethod
    def _clip(logprob: Optional[float]) -> float:
        if logprob is None or math.isnan(logprob):
            return -1e9
        return min(float(logprob), 0.0)

    def _parse_completion(self, choice: Dict[str, Any]) -> GenerationOutput:
        text = choice.get("text", "")
        tokens: List[TokenLogprob] = []
        logprobs = choice.get("logprobs") or {}
        tok_texts = logprobs.get("tokens") or []
        tok_lps = logprobs.get("token_logprobs") or []
        tops = logprobs.get("top_logprobs") or [{}] * len(tok_texts)
        for tok, lp, top in zip(tok_texts, tok_lps, tops):
            alts = tuple(TopLogprob(token=t, logprob=self._clip(v)) for t, v in (top or {}).items())
            tokens.append(TokenLogprob(token=tok, logprob=self._clip(lp), top=alts))
        return GenerationOutput(text=text, tokens=tuple(tokens), finish_reason=self._finish(choice.get("finish_reason")))

    def _parse_chat(self, choice: Dict[str, Any]) -> GenerationOutput:
        text = (choice.get("message") or {}).get("content") or ""
        tokens: List[TokenLogprob] = []
        content = (choice.get("logprobs") or {}).get("content") or []
        for item in content:
            alts = tuple(
                TopLogprob(token=alt["token"], logprob=self._clip(alt.get("logprob")))
                for alt in item.get("top_logprobs") or []
            )
            tokens.append(TokenLogprob(token=item["token"], logprob=self._clip(item.get("logprob")), top=alts))
        return GenerationOutput(text=text, tokens=tuple(tokens), finish_reason=self._finish(choice.get("finish_reason")))

    def _parse(self, payload: Dict[str, Any]) -> GenerationOutput:
        if "error" in payload:
            error = payload["error"]
            message = error.get("message", error) if isinstance(error, dict) else error
            raise GeneratorBackendError(f"Backend error: {message}", response_body=payload)
        choices = payload.get("choices") or []
        if not choices:
            raise GeneratorBackendError("Backend response has no choices", response_body=payload)
        try:
            if self.config.kind == EndpointKind.CHAT:
                return self._parse_chat(choices[0])
            return self._parse_completion(choices[0])
        except (KeyError, TypeError, ValueError) as e:
            raise GeneratorBackendError(f"Malformed backend response: {e}", response_body=payload) from e

    # =========================================================================
    # Completion with Retry
    # =========================================================================

    async def complete(self, prompt: str, params: GenParams) -> GenerationOutput:
        """
        Run one completion.

        Raises:
            GeneratorTransportError: Network failure after retries
            GeneratorBackendError: Backend error payload (not retried)
        """
        client = await self._get_client()
        body = self._build_body(prompt, params)
        last_error: Optional[GeneratorError] = None

        for attempt in range(self.MAX_RETRIES):
            backoff = min(self.RETRY_BACKOFF_BASE * (2 ** attempt), self.RETRY_BACKOFF_MAX)
            last_attempt = attempt == self.MAX_RETRIES - 1
            try:
                response = await client.post(self._path, json=body)
            except httpx.TransportError as e:
                last_error = GeneratorTransportError(f"Request error: {e}")
                if last_attempt:
                    break
                logger.warning(f"Generator transport error: {e}. Retrying in {backoff}s (attempt {attempt + 1})")
                await asyncio.sleep(backoff)
                continue

            if response.status_code == 429 or response.status_code >= 500:
                last_error = GeneratorTransportError(
                    f"Backend status {response.status_code}", status_code=response.status_code
                )
                if last_attempt:
                    break
                retry_after = min(parse_retry_after(response.headers.get("Retry-After"), backoff), self.RETRY_BACKOFF_MAX)
                logger.warning(f"Generator status {response.status_code}. Retrying in {retry_after}s")
                await asyncio.sleep(retry_after)
                continue

            try:
                payload = response.json()
            except ValueError:
                payload = {"error": {"message": response.text}}

            if response.status_code >= 400:
                error = payload.get("error", response.text)
                message = error.get("message", error) if isinstance(error, dict) else error
                raise GeneratorBackendError(
                    f"Backend error {response.status_code}: {message}",
                    status_code=response.status_code,
                    response_body=payload,
                )
            return self._parse(payload)

        raise last_error or GeneratorTransportError("Request failed after all retries")
