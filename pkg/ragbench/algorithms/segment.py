"""
Sentence segmentation used by the per-sentence algorithms (Active RAG, Self-RAG).
Segmentation is lossless: "".join(sentence_segment(text)) == text.
"""

import re
from typing import Iterable, List, Optional

DEFAULT_ABBREVIATIONS = frozenset({
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.",
    "etc.", "e.g.", "i.e.", "inc.", "ltd.", "co.", "no.", "fig.",
})

_BOUNDARY_RE = re.compile(r"[.?!]+(?=\s|$)")


def _word_before(text: str, end: int) -> str:
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end]


def sentence_segment(text: str, abbreviations: Optional[Iterable[str]] = None) -> List[str]:
    """
    Split text after '.', '?' or '!' followed by whitespace or end of text.

    Whitespace after a boundary starts the next sentence; trailing whitespace
    stays with the last sentence. A '.' ending a listed abbreviation is not a
    boundary.

    Usage:
        sentence_segment("A. B? C")  # ["A.", " B?", " C"]

    Args:
        text: Text to split
        abbreviations: Lowercase abbreviations including the final dot
    """
    if not text:
        return []
    exempt = DEFAULT_ABBREVIATIONS if abbreviations is None else frozenset(a.lower() for a in abbreviations)

    sentences: List[str] = []
    start = 0
    for match in _BOUNDARY_RE.finditer(text):
        end = match.end()
        if set(match.group()) == {"."} and _word_before(text, end).lower() in exempt:
            continue
        sentences.append(text[start:end])
        start = end

    tail = text[start:]
    if tail:
        if tail.isspace() and sentences:
            sentences[-1] += tail
        else:
            sentences.append(tail)
    return sentences
