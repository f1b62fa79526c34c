"""
Retrieval Service
Shares one loaded index between many concurrent evaluation runs and answers
repeated queries from the persistent cache without recomputation.
"""

import threading
import time
from contextlib import contextmanager
from collections import deque
from pathlib import Path
from typing import Deque, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from ragbench.errors import RagBenchError

from .cache import QueryCache, normalize_query
from .index import InvertedIndex
from .models import CacheEntry, CacheKey, Passage, RetrieverInfo, SearchResult, ServiceStats


class RetrievalServiceError(RagBenchError):
    """Index search failed inside the service"""
    pass


class _KeyLock:
    __slots__ = ("lock", "users")

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.users = 0


class RetrievalService:
    """
    Cached search over one immutable index.

    Concurrent readers are unrestricted; misses on the same key are serialized by
    a per-key lock so concurrent identical misses store exactly one entry.

    Usage:
        service = RetrievalService(index, cache_path=Path("cache.jsonl"))
        passages, hit = service.cached_search("who wrote hamlet", k=10)
        service.close()
    """

    LATENCY_WINDOW = 10_000

    def __init__(
        self,
        index: InvertedIndex,
        cache_path: Optional[Union[str, Path]] = None,
        max_entries: Optional[int] = None,
    ):
        self.index = index
        self.cache = QueryCache(cache_path, corpus_fingerprint=index.corpus_fingerprint, max_entries=max_entries)

        self._stats_lock = threading.Lock()
        self._keys_lock = threading.Lock()
        self._key_locks: Dict[CacheKey, _KeyLock] = {}

        self._total = 0
        self._hits = 0
        self._misses = 0
        self._search_invocations = 0
        self._latencies: Deque[float] = deque(maxlen=self.LATENCY_WINDOW)
        self.warnings: List[str] = []

        self.warnings.extend(self.cache.load())
        logger.info(f"RetrievalService ready (fingerprint {index.corpus_fingerprint[:12]}, {len(self.cache)} cached)")

    # =========================================================================
    # Identity
    # =========================================================================

    @property
    def corpus_fingerprint(self) -> str:
        return self.index.corpus_fingerprint

    def info(self) -> RetrieverInfo:
        return self.index.info()

    def make_key(self, query: str, k: int) -> CacheKey:
        return CacheKey(
            query=normalize_query(query),
            k=k,
            corpus_fingerprint=self.index.corpus_fingerprint,
            config_digest=self.index.config_digest,
        )

    @contextmanager
    def _key_lock(self, key: CacheKey) -> Iterator[None]:
        """Hold the per-key miss lock; the lock is dropped once no caller holds or awaits it"""
        with self._keys_lock:
            slot = self._key_locks.get(key)
            if slot is None:
                slot = self._key_locks[key] = _KeyLock()
            slot.users += 1
        try:
            with slot.lock:
                yield
        finally:
            with self._keys_lock:
                slot.users -= 1
                if slot.users == 0:
                    del self._key_locks[key]

    def _record(self, hit: bool, started: float) -> None:
        elapsed = time.perf_counter() - started
        with self._stats_lock:
            self._total += 1
            if hit:
                self._hits += 1
            else:
                self._misses += 1
            self._latencies.append(elapsed)

    def _warn(self, message: str) -> None:
        logger.warning(message)
        with self._stats_lock:
            self.warnings.append(message)

    # =========================================================================
    # Search
    # =========================================================================

    def cached_search(self, query: str, k: int = 10) -> Tuple[List[Passage], bool]:
        """
        Search through the cache.

        Returns:
            (passages, hit) where the passages on a hit are the stored ones

        Raises:
            RetrievalServiceError: Index search failed
        """
        started = time.perf_counter()
        key = self.make_key(query, k)

        entry = self.cache.get(key)
        if entry is not None:
            self._record(True, started)
            logger.debug(f"Cache hit: {key.query!r} k={k}")
            return entry.passages, True

        with self._key_lock(key):
            # another caller may have filled the key while we waited
            entry = self.cache.get(key)
            if entry is not None:
                self._record(True, started)
                return entry.passages, True

            try:
                with self._stats_lock:
                    self._search_invocations += 1
                passages = self.index.search(key.query, k)
            except Exception as e:
                self._record(False, started)
                raise RetrievalServiceError(f"Index search failed for {key.query!r}: {e}") from e

            entry = CacheEntry(key=key, passages=passages)
            try:
                self.cache.put(entry)
            except OSError as e:
                self._warn(f"Cache write failed for {key.query!r}: {e}")

        self._record(False, started)
        logger.debug(f"Cache miss: {key.query!r} k={k} -> {len(passages)} passages")
        return entry.passages, False

    def search(self, query: str, k: int = 10) -> SearchResult:
        passages, hit = self.cached_search(query, k)
        return SearchResult(passages=passages, cache_hit=hit)

    # =========================================================================
    # Stats / Lifecycle
    # =========================================================================

    def stats(self) -> ServiceStats:
        with self._stats_lock:
            samples = np.array(self._latencies, dtype=float) * 1000.0
            return ServiceStats(
                total_queries=self._total,
                cache_hits=self._hits,
                cache_misses=self._misses,
                search_invocations=self._search_invocations,
                cache_entries=len(self.cache),
                latency_p50_ms=float(np.percentile(samples, 50)) if samples.size else None,
                latency_p99_ms=float(np.percentile(samples, 99)) if samples.size else None,
                warnings=list(self.warnings),
            )

    def close(self) -> None:
        """Persist the cache (compacted journal)."""
        try:
            self.cache.close()
        except OSError as e:
            self._warn(f"Failed to persist cache: {e}")
