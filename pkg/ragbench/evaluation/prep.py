"""
Training-data preparation: strip reflection/special tokens from JSONL records.
"""

import json
import re
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

from loguru import logger

from ragbench.algorithms.models import ReflectionVocab
from ragbench.errors import UsageError

from .datasets import DatasetError

_SPACES_RE = re.compile(r" {2,}")


def default_special_tokens() -> List[str]:
    """Retrieval, relevance, support and utility markers plus paragraph tags"""
    return ReflectionVocab().all_tokens()


def load_token_list(path: Union[str, Path]) -> List[str]:
    """One token per line; blank lines and '#' comments ignored"""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.strip().startswith("#")]


class _Stripper:
    def __init__(self, tokens: Sequence[str]):
        ordered = sorted({t for t in tokens if t}, key=lambda t: (-len(t), t))
        if not ordered:
            raise UsageError("special-token list must be non-empty")
        self.pattern = re.compile("|".join(re.escape(t) for t in ordered))
        self.removed = 0

    def text(self, value: str) -> str:
        stripped, count = self.pattern.subn("", value)
        if not count:
            return value
        self.removed += count
        return _SPACES_RE.sub(" ", stripped)

    def walk(self, value: Any) -> Any:
        if isinstance(value, str):
            return self.text(value)
        if isinstance(value, list):
            return [self.walk(v) for v in value]
        if isinstance(value, dict):
            return {k: self.walk(v) for k, v in value.items()}
        return value


def strip_special_tokens(records: Iterable[Any], tokens: Optional[Sequence[str]] = None) -> Tuple[List[Any], int]:
    """
    Remove every occurrence of each token from all string fields.

    Longer tokens are matched first; runs of spaces left behind collapse to one.

    Returns:
        (stripped records, number of removed occurrences)
    """
    stripper = _Stripper(default_special_tokens() if tokens is None else tokens)
    stripped = [stripper.walk(record) for record in records]
    return stripped, stripper.removed


def prep_file(
    in_path: Union[str, Path],
    out_path: Union[str, Path],
    tokens: Optional[Sequence[str]] = None,
) -> int:
    """
    Strip a JSONL file into another JSONL file; returns the removal count.

    Lines without any special token are copied unchanged.

    Raises:
        DatasetError: Missing input or a line that is not valid JSON
    """
    in_path = Path(in_path)
    if not in_path.is_file():
        raise DatasetError(f"input file not found: {in_path}")
    stripper = _Stripper(default_special_tokens() if tokens is None else tokens)
    lines: List[str] = []
    with in_path.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"invalid JSON: {e.msg}", line=line_no) from None
            before = stripper.removed
            stripped = stripper.walk(record)
            lines.append(line.rstrip("\r\n") if stripper.removed == before else json.dumps(stripped, ensure_ascii=False))

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    logger.info(f"Stripped {stripper.removed} special tokens from {len(lines)} records -> {out_path}")
    return stripper.removed
