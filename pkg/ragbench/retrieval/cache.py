"""
Persistent Query Cache
Append-only JSONL journal of search results, replayed on start-up and
compacted on shutdown.
"""

import json
import os
import re
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Iterator, List, Optional, Union

from loguru import logger
from pydantic import ValidationError

from .models import CacheEntry, CacheKey

_WS_RE = re.compile(r"\s+")


def normalize_query(query: str) -> str:
    """Trim, collapse internal whitespace, lowercase"""
    return _WS_RE.sub(" ", query.strip()).lower()


class CacheCorruptError(Exception):
    """Journal contains an unreadable entry"""
    pass


class QueryCache:
    """
    In-memory cache of search results backed by a JSONL journal.

    Entries whose corpus fingerprint differs from the loaded index are dropped
    during replay. With `max_entries` set the cache evicts least recently used
    entries; otherwise it grows without bound.

    Usage:
        cache = QueryCache(Path("cache.jsonl"), corpus_fingerprint=index.corpus_fingerprint)
        cache.load()
        entry = cache.get(key)
        cache.put(CacheEntry(key=key, passages=hits))
        cache.close()
    """

    def __init__(
        self,
        path: Optional[Union[str, Path]] = None,
        corpus_fingerprint: Optional[str] = None,
        max_entries: Optional[int] = None,
    ):
        self.path = Path(path) if path else None
        self.corpus_fingerprint = corpus_fingerprint
        self.max_entries = max_entries
        self._entries: "OrderedDict[CacheKey, CacheEntry]" = OrderedDict()
        self._lock = threading.Lock()
        self._journal = None

    def __len__(self) -> int:
        return len(self._entries)

    # =========================================================================
    # Load / Persist
    # =========================================================================

    def _replay(self) -> Iterator[CacheEntry]:
        lines = self.path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                yield CacheEntry.model_validate_json(line)
            except (ValidationError, ValueError) as e:
                # a torn final line is what a crash mid-append leaves behind
                if i == len(lines):
                    logger.warning(f"Ignoring truncated last cache journal line {i} in {self.path}")
                    return
                raise CacheCorruptError(f"line {i}: {e}") from e

    def load(self) -> List[str]:
        """
        Replay the journal if it exists.

        Returns:
            Warning messages (empty when the journal was clean)
        """
        warnings: List[str] = []
        if self.path is None or not self.path.exists():
            return warnings

        loaded: "OrderedDict[CacheKey, CacheEntry]" = OrderedDict()
        stale = 0
        try:
            for entry in self._replay():
                if self.corpus_fingerprint and entry.key.corpus_fingerprint != self.corpus_fingerprint:
                    stale += 1
                    continue
                loaded[entry.key] = entry
                loaded.move_to_end(entry.key)
        except (CacheCorruptError, OSError, UnicodeDecodeError) as e:
            message = f"Cache file {self.path} is corrupt ({e}); starting with an empty cache"
            logger.warning(message)
            warnings.append(message)
            loaded = OrderedDict()

        with self._lock:
            self._entries = loaded
            self._evict()
        if stale:
            warnings.append(f"Dropped {stale} cache entries built for a different corpus")
            logger.warning(warnings[-1])
        logger.info(f"Loaded {len(self._entries)} cached searches from {self.path}")
        return warnings

    def _append(self, entry: CacheEntry) -> None:
        if self.path is None:
            return
        if self._journal is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._journal = self.path.open("a", encoding="utf-8")
        self._journal.write(entry.model_dump_json() + "\n")
        self._journal.flush()

    def compact(self) -> None:
        """Rewrite the journal with exactly the live entries."""
        if self.path is None:
            return
        with self._lock:
            if self._journal is not None:
                self._journal.close()
                self._journal = None
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with tmp.open("w", encoding="utf-8") as fh:
                for entry in self._entries.values():
                    fh.write(entry.model_dump_json() + "\n")
            os.replace(tmp, self.path)
        logger.info(f"Compacted cache journal {self.path} ({len(self._entries)} entries)")

    def close(self) -> None:
        self.compact()

    # =========================================================================
    # Access
    # =========================================================================

    def _evict(self) -> None:
        if self.max_entries is None:
            return
        while len(self._entries) > self.max_entries:
            self._entries.popitem(last=False)

    def get(self, key: CacheKey) -> Optional[CacheEntry]:
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                self._entries.move_to_end(key)
            return entry

    def put(self, entry: CacheEntry) -> None:
        """
        Store an entry in memory, then journal it.

        Raises:
            OSError: Journal write failed (the in-memory entry is kept)
        """
        with self._lock:
            self._entries[entry.key] = entry
            self._entries.move_to_end(entry.key)
            self._evict()
            self._append(entry)
