"""
Corpus Ingestion
Reads raw DPR-style TSV or JSONL corpora and splits every document into
fixed-size word windows that become retrievable passages.
"""

import csv
import json
import re
from pathlib import Path
from typing import Iterator, List, Tuple, Union

from loguru import logger

from ragbench.errors import InputFormatError, RagBenchError

from .models import Corpus, CorpusFormat, Passage

TOKENIZER_ID = "unicode-alnum-lower-v1"
DEFAULT_CHUNK_WORDS = 100

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CorpusFormatError(InputFormatError):
    """A corpus row does not match the declared format"""
    pass


class EmptyCorpusError(RagBenchError):
    """Ingestion produced no passages"""

    exit_code = 2


def tokenize(text: str) -> List[str]:
    """Lowercase and split on non-alphanumeric boundaries."""
    return _TOKEN_RE.findall(text.lower())


def split_windows(text: str, size: int) -> List[str]:
    """Consecutive windows of at most `size` whitespace tokens"""
    words = text.split()
    return [" ".join(words[i:i + size]) for i in range(0, len(words), size)]


# =============================================================================
# Readers
# =============================================================================

def _read_dpr_tsv(path: Path) -> Iterator[Tuple[int, str, str]]:
    """Yield (line number, title, text) from an `id<TAB>text<TAB>title` file"""
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        for row in reader:
            line_no = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if line_no == 1 and [c.strip().lower() for c in row] == ["id", "text", "title"]:
                continue
            if len(row) != 3:
                raise CorpusFormatError(f"expected 3 tab-separated columns (id, text, title), got {len(row)}", line=line_no)
            _, text, title = row
            yield line_no, title, text


def _read_jsonl(path: Path) -> Iterator[Tuple[int, str, str]]:
    """Yield (line number, title, text) from a JSON-lines file"""
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"invalid JSON: {e.msg}", line=line_no) from e
            if not isinstance(record, dict):
                raise CorpusFormatError("expected a JSON object", line=line_no)
            missing = [k for k in ("title", "text") if k not in record]
            if missing:
                raise CorpusFormatError(f"missing key(s): {', '.join(missing)}", line=line_no)
            yield line_no, str(record["title"]), str(record["text"])


_READERS = {
    CorpusFormat.DPR_TSV: _read_dpr_tsv,
    CorpusFormat.JSONL: _read_jsonl,
}


# =============================================================================
# Ingestion
# =============================================================================

def ingest_corpus(
    source: Union[str, Path],
    format: Union[str, CorpusFormat] = CorpusFormat.DPR_TSV,
    chunk_words: int = DEFAULT_CHUNK_WORDS,
) -> Corpus:
    """
    Ingest a raw corpus into passages.

    Args:
        source: Corpus file
        format: "dpr-tsv" or "jsonl"
        chunk_words: Maximum whitespace tokens per passage

    Returns:
        Corpus with dense passage ids and a content fingerprint

    Raises:
        CorpusFormatError: Malformed row (message names the line)
        EmptyCorpusError: No passage could be produced
    """
    path = Path(source)
    if not path.is_file():
        raise InputFormatError(f"corpus file not found: {path}")
    if chunk_words < 1:
        raise InputFormatError(f"chunk_words must be positive, got {chunk_words}")

    fmt = CorpusFormat(format)
    passages: List[Passage] = []
    documents = 0

    for _, title, text in _READERS[fmt](path):
        documents += 1
        for window in split_windows(text, chunk_words):
            passages.append(Passage(id=len(passages), title=title, text=window))

    if not passages:
        raise EmptyCorpusError(f"corpus {path} produced no passages")

    corpus = Corpus.from_passages(passages, documents=documents)
    logger.info(f"Ingested {documents} documents into {len(passages)} passages from {path} ({fmt.value})")
    return corpus
