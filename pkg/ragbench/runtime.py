"""
Runtime
Builds the shared components a run needs (instruction store, generator gateway,
retriever) from a RunConfig and tears them down afterwards.
"""

from typing import TYPE_CHECKING, Optional

from loguru import logger

from ragbench.errors import ConfigError
from ragbench.generation.gateway import GeneratorGateway
from ragbench.instructions.lab import InstructionStore, load_pools
from ragbench.retrieval.client import LocalRetriever, RetrievalClient, Retriever
from ragbench.retrieval.index import InvertedIndex
from ragbench.retrieval.service import RetrievalService

if TYPE_CHECKING:
    from ragbench.config import RetrieverSettings, RunConfig


class Runtime:
    """
    Shared components for one or more algorithm runs.

    Usage:
        runtime = build_runtime(config)
        try:
            ...
        finally:
            await runtime.close()
    """

    def __init__(
        self,
        instructions: InstructionStore,
        gateway: GeneratorGateway,
        retriever: Optional[Retriever] = None,
    ):
        self.instructions = instructions
        self.gateway = gateway
        self.retriever = retriever

    async def close(self) -> None:
        await self.gateway.close()
        close = getattr(self.retriever, "close", None)
        if close is not None:
            await close()


def build_retriever(settings: "RetrieverSettings") -> Optional[Retriever]:
    """Remote client for an endpoint, in-process service for an index path"""
    if settings.endpoint and settings.index_path:
        raise ConfigError(
            "retriever needs either endpoint or index_path, not both",
            fields=["retriever.endpoint", "retriever.index_path"],
        )
    if settings.endpoint:
        logger.info(f"Using retrieval service at {settings.endpoint}")
        return RetrievalClient(settings.endpoint, timeout=settings.timeout)
    if settings.index_path:
        index = InvertedIndex.load(settings.index_path)
        service = RetrievalService(index, cache_path=settings.cache_path, max_entries=settings.max_cache_entries)
        return LocalRetriever(service)
    return None


def build_runtime(config: "RunConfig") -> Runtime:
    """
    Raises:
        ConfigError: Instructions or retriever settings do not resolve
    """
    return Runtime(
        instructions=load_pools(config.instructions_path),
        gateway=GeneratorGateway(config.generators),
        retriever=build_retriever(config.retriever),
    )
