"""
Retrieval Models
Pydantic models for corpus passages, cache identity, service statistics and the
HTTP wire format of the retrieval service.
"""

import hashlib
from datetime import datetime, timezone
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


# =============================================================================
# Enums
# =============================================================================

class CorpusFormat(str, Enum):
    """Supported raw corpus layouts"""
    DPR_TSV = "dpr-tsv"
    JSONL = "jsonl"


# =============================================================================
# Corpus Models
# =============================================================================

class Passage(BaseModel):
    """One retrievable text chunk"""
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0)
    title: str = ""
    text: str = Field(..., min_length=1)
    score: float = 0.0


class Corpus(BaseModel):
    """Ordered passages plus a content digest"""
    model_config = ConfigDict(frozen=True)

    passages: List[Passage]
    fingerprint: str
    documents: int = 0

    @staticmethod
    def compute_fingerprint(passages: List[Passage]) -> str:
        digest = hashlib.sha256()
        for p in passages:
            digest.update(f"{p.id}\x1f{p.title}\x1f{p.text}\x1e".encode("utf-8"))
        return digest.hexdigest()

    @classmethod
    def from_passages(cls, passages: List[Passage], documents: int = 0) -> "Corpus":
        return cls(passages=passages, fingerprint=cls.compute_fingerprint(passages), documents=documents)

    def __len__(self) -> int:
        return len(self.passages)


class CorpusStats(BaseModel):
    """Summary printed after an index build"""
    documents: int = 0
    passages: int = 0
    terms: int = 0
    tokens: int = 0
    fingerprint: str = ""


class RetrieverInfo(BaseModel):
    """Identity of a loaded retriever, used by the alignment fingerprint"""
    corpus_fingerprint: str
    config_digest: str
    format_version: int = 1
    tokenizer: str = ""
    k1: float = 0.0
    b: float = 0.0
    passages: int = 0


# =============================================================================
# Cache Models
# =============================================================================

class CacheKey(BaseModel):
    """Identity of one cached search"""
    model_config = ConfigDict(frozen=True)

    query: str
    k: int = Field(..., ge=1)
    corpus_fingerprint: str
    config_digest: str


class CacheEntry(BaseModel):
    """Stored search result"""
    key: CacheKey
    passages: List[Passage]
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class ServiceStats(BaseModel):
    """Counters exposed by GET /stats"""
    total_queries: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    search_invocations: int = 0
    cache_entries: int = 0
    latency_p50_ms: Optional[float] = None
    latency_p99_ms: Optional[float] = None
    warnings: List[str] = Field(default_factory=list)


# =============================================================================
# Wire Models
# =============================================================================

class SearchRequest(BaseModel):
    """POST /search body"""
    query: str
    k: int = Field(10, ge=1)


class SearchResponse(BaseModel):
    """POST /search response"""
    passages: List[Passage]
    cache_hit: bool


class SearchResult(BaseModel):
    """What a retriever hands back to an algorithm"""
    passages: List[Passage] = Field(default_factory=list)
    cache_hit: bool = False


class HealthResponse(BaseModel):
    status: str = "ok"
    corpus_fingerprint: str
