"""
Retrieval Clients
Remote (HTTP) and in-process retrievers sharing one async interface, so an
algorithm never knows whether its passages came over the network.

Retry: 3 attempts, exponential backoff on transport faults, 429 and 5xx.
"""

import asyncio
from typing import List, Optional, Protocol, runtime_checkable

import httpx
from loguru import logger
from pydantic import ValidationError

from ragbench.errors import RagBenchError

from .models import Passage, RetrieverInfo, SearchResponse, SearchResult
from .service import RetrievalService


class RetrievalClientError(RagBenchError):
    """Base exception for retrieval client errors"""

    def __init__(self, message: str, status_code: Optional[int] = None, body: str = ""):
        super().__init__(message)
        self.status_code = status_code
        self.body = body


class RetrievalTransportError(RetrievalClientError):
    """Endpoint unreachable after all retries"""
    pass


class RetrievalProtocolError(RetrievalClientError):
    """Non-2xx status or malformed response body"""

    def __init__(self, message: str, status_code: Optional[int] = None, body: str = "", field: Optional[str] = None):
        super().__init__(message, status_code=status_code, body=body)
        self.field = field


@runtime_checkable
class Retriever(Protocol):
    """What algorithms need from a retriever"""

    async def search(self, query: str, k: int) -> SearchResult:
        ...

    async def describe(self) -> RetrieverInfo:
        ...


class LocalRetriever:
    """In-process retriever over a RetrievalService (shares its cache)"""

    def __init__(self, service: RetrievalService):
        self.service = service

    async def search(self, query: str, k: int) -> SearchResult:
        return self.service.search(query, k)

    async def describe(self) -> RetrieverInfo:
        return self.service.info()

    async def close(self) -> None:
        self.service.close()


class RetrievalClient:
    """
    HTTP client for the retrieval service.

    Safe for concurrent use by many in-flight inferences.

    Usage:
        async with RetrievalClient("http://127.0.0.1:8765") as client:
            result = await client.search("who wrote hamlet", k=10)
    """

    MAX_RETRIES = 3
    RETRY_BACKOFF_BASE = 0.25
    RETRY_BACKOFF_MAX = 5.0
    DEFAULT_TIMEOUT = 30.0

    def __init__(
        self,
        endpoint: str,
        timeout: Optional[float] = None,
        transport: Optional[httpx.AsyncBaseTransport] = None,
        max_retries: Optional[int] = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout or self.DEFAULT_TIMEOUT
        self.max_retries = max_retries or self.MAX_RETRIES
        self._transport = transport
        self._client: Optional[httpx.AsyncClient] = None

    async def _get_client(self) -> httpx.AsyncClient:
        """Get or create HTTP client"""
        if self._client is None or self._client.is_closed:
            self._client = httpx.AsyncClient(
                base_url=self.endpoint,
                timeout=httpx.Timeout(self.timeout),
                transport=self._transport,
                headers={"Content-Type": "application/json", "Accept": "application/json"},
            )
        return self._client

    async def close(self) -> None:
        if self._client and not self._client.is_closed:
            await self._client.aclose()
            self._client = None

    async def __aenter__(self):
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close()

    # =========================================================================
    # HTTP with Retry
    # =========================================================================

    def _backoff(self, attempt: int) -> float:
        return min(self.RETRY_BACKOFF_BASE * (2 ** attempt), self.RETRY_BACKOFF_MAX)

    async def _request(self, method: str, path: str, json_data: Optional[dict] = None) -> dict:
        """
        Make an idempotent request with bounded retries.

        Raises:
            RetrievalTransportError: Unreachable after retries
            RetrievalProtocolError: Non-2xx response or non-JSON body
        """
        client = await self._get_client()
        last_error: Optional[RetrievalClientError] = None

        for attempt in range(self.max_retries):
            last_attempt = attempt == self.max_retries - 1
            try:
                response = await client.request(method, path, json=json_data)
            except httpx.TransportError as e:
                last_error = RetrievalTransportError(f"{method} {self.endpoint}{path} failed: {e}")
                if last_attempt:
                    break
                backoff = self._backoff(attempt)
                logger.warning(f"Retriever transport error: {e}. Retrying in {backoff}s (attempt {attempt + 1})")
                await asyncio.sleep(backoff)
                continue

            if response.status_code == 429 or response.status_code >= 500:
                last_error = RetrievalProtocolError(
                    f"Retriever returned {response.status_code}: {response.text}",
                    status_code=response.status_code,
                    body=response.text,
                )
                if last_attempt:
                    break
                backoff = self._backoff(attempt)
                logger.warning(f"Retriever status {response.status_code}. Retrying in {backoff}s")
                await asyncio.sleep(backoff)
                continue

            if not 200 <= response.status_code < 300:
                raise RetrievalProtocolError(
                    f"Retriever returned {response.status_code}: {response.text}",
                    status_code=response.status_code,
                    body=response.text,
                )

            try:
                return response.json()
            except ValueError as e:
                raise RetrievalProtocolError(
                    f"Retriever response is not JSON: {e}",
                    status_code=response.status_code,
                    body=response.text,
                    field="<body>",
                ) from e

        raise last_error or RetrievalTransportError("Request failed after all retries")

    @staticmethod
    def _validate(model, payload: dict):
        try:
            return model.model_validate(payload)
        except ValidationError as e:
            first = e.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or "<body>"
            raise RetrievalProtocolError(
                f"Malformed retriever response: field {field!r}: {first['msg']}",
                body=str(payload),
                field=field,
            ) from e

    # =========================================================================
    # API
    # =========================================================================

    async def search(self, query: str, k: int = 10) -> SearchResult:
        payload = await self._request("POST", "/search", {"query": query, "k": k})
        response = self._validate(SearchResponse, payload)
        return SearchResult(passages=response.passages, cache_hit=response.cache_hit)

    async def describe(self) -> RetrieverInfo:
        return self._validate(RetrieverInfo, await self._request("GET", "/info"))


async def client_search(endpoint: str, query: str, k: int = 10) -> List[Passage]:
    """One-shot search against a running service"""
    async with RetrievalClient(endpoint) as client:
        result = await client.search(query, k)
    return result.passages
