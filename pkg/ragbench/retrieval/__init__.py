"""
Retrieval Module
Corpus ingestion, BM25 inverted index, cached retrieval service and clients.
"""

from .models import (
    CacheEntry,
    CacheKey,
    Corpus,
    CorpusFormat,
    CorpusStats,
    Passage,
    RetrieverInfo,
    SearchResult,
    ServiceStats,
)
from .corpus import CorpusFormatError, EmptyCorpusError, ingest_corpus, tokenize, TOKENIZER_ID
from .index import InvertedIndex, IndexFormatError, build_index, search
from .cache import QueryCache, normalize_query
from .service import RetrievalService, RetrievalServiceError
from .client import (
    LocalRetriever,
    RetrievalClient,
    RetrievalClientError,
    RetrievalProtocolError,
    RetrievalTransportError,
    Retriever,
    client_search,
)


__all__ = [
    # Models
    "CacheEntry",
    "CacheKey",
    "Corpus",
    "CorpusFormat",
    "CorpusStats",
    "Passage",
    "RetrieverInfo",
    "SearchResult",
    "ServiceStats",
    # Corpus / Index
    "CorpusFormatError",
    "EmptyCorpusError",
    "ingest_corpus",
    "tokenize",
    "TOKENIZER_ID",
    "InvertedIndex",
    "IndexFormatError",
    "build_index",
    "search",
    # Service
    "QueryCache",
    "normalize_query",
    "RetrievalService",
    "RetrievalServiceError",
    # Clients
    "LocalRetriever",
    "RetrievalClient",
    "RetrievalClientError",
    "RetrievalProtocolError",
    "RetrievalTransportError",
    "Retriever",
    "client_search",
]
