"""
Inverted Index and BM25 Search
Deterministic lexical retriever behind the unified search interface.

The serialized form is a single canonical JSON document (sorted keys, fixed
separators) so that building the same corpus twice yields byte-identical files.
"""

import hashlib
import json
import math
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from loguru import logger

from ragbench.errors import RagBenchError

from .corpus import TOKENIZER_ID, tokenize
from .models import Corpus, CorpusStats, Passage, RetrieverInfo

INDEX_FORMAT_VERSION = 1
DEFAULT_K1 = 0.9
DEFAULT_B = 0.4

Posting = Tuple[int, int]


class IndexFormatError(RagBenchError):
    """Serialized index cannot be read"""

    exit_code = 2


def bm25_term_score(tf: int, df: int, doc_len: int, avgdl: float, n_docs: int, k1: float, b: float) -> float:
    """Okapi BM25 contribution of one query term to one passage."""
    idf = math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
    norm = k1 * (1.0 - b + b * doc_len / avgdl) if avgdl > 0 else k1
    return idf * (tf * (k1 + 1.0)) / (tf + norm)


def retriever_config_digest(k1: float, b: float, tokenizer: str = TOKENIZER_ID) -> str:
    payload = json.dumps({"retriever": "bm25", "k1": k1, "b": b, "tokenizer": tokenizer}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class InvertedIndex:
    """
    Immutable term → postings index over one corpus.

    Usage:
        index = build_index(corpus)
        hits = index.search("henry feilden occupation", k=10)
        index.save("wiki.idx.json")
    """

    def __init__(
        self,
        passages: List[Passage],
        postings: Dict[str, List[Posting]],
        doc_lengths: List[int],
        corpus_fingerprint: str,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        tokenizer: str = TOKENIZER_ID,
    ):
        self.passages = passages
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.corpus_fingerprint = corpus_fingerprint
        self.k1 = k1
        self.b = b
        self.tokenizer = tokenizer
        self.doc_count = len(doc_lengths)
        self.avgdl = sum(doc_lengths) / self.doc_count if self.doc_count else 0.0

    # =========================================================================
    # Introspection
    # =========================================================================

    @property
    def config_digest(self) -> str:
        return retriever_config_digest(self.k1, self.b, self.tokenizer)

    def info(self) -> RetrieverInfo:
        return RetrieverInfo(
            corpus_fingerprint=self.corpus_fingerprint,
            config_digest=self.config_digest,
            format_version=INDEX_FORMAT_VERSION,
            tokenizer=self.tokenizer,
            k1=self.k1,
            b=self.b,
            passages=self.doc_count,
        )

    def stats(self, documents: int = 0) -> CorpusStats:
        return CorpusStats(
            documents=documents,
            passages=self.doc_count,
            terms=len(self.postings),
            tokens=sum(self.doc_lengths),
            fingerprint=self.corpus_fingerprint,
        )

    # =========================================================================
    # Search
    # =========================================================================

    def score_all(self, query: str) -> Dict[int, float]:
        """BM25 score of every passage sharing at least one term with the query"""
        scores: Dict[int, float] = {}
        # distinct terms, first-occurrence order
        for term in dict.fromkeys(tokenize(query)):
            postings = self.postings.get(term)
            if not postings:
                continue
            df = len(postings)
            for doc_id, tf in postings:
                contribution = bm25_term_score(
                    tf, df, self.doc_lengths[doc_id], self.avgdl, self.doc_count, self.k1, self.b
                )
                scores[doc_id] = scores.get(doc_id, 0.0) + contribution
        return scores

    def search(self, query: str, k: int = 10) -> List[Passage]:
        """
        Top-k passages by BM25 score.

        Ties are broken by ascending passage id; passages without any
        overlapping term are never returned.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores = self.score_all(query)
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
        return [self.passages[doc_id].model_copy(update={"score": score}) for doc_id, score in ranked]

    # =========================================================================
    # Persistence
    # =========================================================================

    def to_dict(self) -> Dict[str, Any]:
        return {
            "header": {
                "format_version": INDEX_FORMAT_VERSION,
                "tokenizer": self.tokenizer,
                "bm25": {"k1": self.k1, "b": self.b},
                "corpus_fingerprint": self.corpus_fingerprint,
                "doc_count": self.doc_count,
            },
            "passages": [[p.id, p.title, p.text] for p in self.passages],
            "doc_lengths": self.doc_lengths,
            "postings": {term: [list(p) for p in plist] for term, plist in self.postings.items()},
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        logger.info(f"Saved index ({self.doc_count} passages, {len(self.postings)} terms) to {path}")
        return path

    @classmethod
    def from_bytes(cls, data: bytes) -> "InvertedIndex":
        try:
            raw = json.loads(data.decode("utf-8"))
            header = raw["header"]
            version = header["format_version"]
            if version != INDEX_FORMAT_VERSION:
                raise IndexFormatError(f"unsupported index format version {version}")
            passages = [Passage(id=pid, title=title, text=text) for pid, title, text in raw["passages"]]
            postings = {term: [(int(d), int(tf)) for d, tf in plist] for term, plist in raw["postings"].items()}
            index = cls(
                passages=passages,
                postings=postings,
                doc_lengths=[int(n) for n in raw["doc_lengths"]],
                corpus_fingerprint=header["corpus_fingerprint"],
                k1=float(header["bm25"]["k1"]),
                b=float(header["bm25"]["b"]),
                tokenizer=header["tokenizer"],
            )
        except IndexFormatError:
            raise
        except (KeyError, TypeError, ValueError, UnicodeDecodeError) as e:
            raise IndexFormatError(f"malformed index file: {e}") from e
        if index.tokenizer != TOKENIZER_ID:
            raise IndexFormatError(f"index built with tokenizer {index.tokenizer!r}, this build uses {TOKENIZER_ID!r}")
        return index

    @classmethod
    def load(cls, path: Union[str, Path]) -> "InvertedIndex":
        path = Path(path)
        if not path.is_file():
            raise IndexFormatError(f"index file not found: {path}")
        index = cls.from_bytes(path.read_bytes())
        logger.info(f"Loaded index from {path}: {index.doc_count} passages, fingerprint {index.corpus_fingerprint[:12]}")
        return index


def build_index(corpus: Corpus, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> InvertedIndex:
    """
    Build an inverted index over a non-empty corpus.

    Postings are appended in passage-id order, so every posting list is sorted
    ascending by id and each passage's term frequencies sum to its token count.
    """
    if not corpus.passages:
        raise ValueError("cannot index an empty corpus")

    postings: Dict[str, List[Posting]] = {}
    doc_lengths: List[int] = []
    for passage in corpus.passages:
        tokens = tokenize(passage.text)
        doc_lengths.append(len(tokens))
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((passage.id, tf))

    index = InvertedIndex(
        passages=list(corpus.passages),
        postings=postings,
        doc_lengths=doc_lengths,
        corpus_fingerprint=corpus.fingerprint,
        k1=k1,
        b=b,
    )
    logger.info(f"Built index: {index.doc_count} passages, {len(postings)} terms, avgdl={index.avgdl:.2f}")
    return index


def search(index: InvertedIndex, query: str, k: int = 10) -> List[Passage]:
    """Module-level alias of InvertedIndex.search"""
    return index.search(query, k)
