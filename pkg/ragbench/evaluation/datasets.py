"""
Dataset Adapters
Key-mapped JSONL loading into BenchmarkItems and sequential sampling.
"""

import json
import string
from pathlib import Path
from typing import Any, List, Optional, Sequence, Union

from loguru import logger
from pydantic import ValidationError

from ragbench.errors import InputFormatError, UsageError

from .models import BenchmarkItem, Choice, KeyMap


class DatasetError(InputFormatError):
    """Dataset record does not match its key map"""
    pass


def resolve_path(record: Any, path: str) -> Any:
    """
    Value at a dotted path; `*` maps the rest of the path over a list.

    Raises:
        KeyError: A segment is missing
    """
    head, _, rest = path.partition(".")
    if head == "*":
        if not isinstance(record, list):
            raise KeyError(path)
        return [resolve_path(element, rest) if rest else element for element in record]
    if isinstance(record, dict) and head in record:
        value = record[head]
    elif isinstance(record, list) and head.lstrip("-").isdigit() and -len(record) <= int(head) < len(record):
        value = record[int(head)]
    else:
        raise KeyError(path)
    return resolve_path(value, rest) if rest else value


def _flatten(value: Any) -> List[Any]:
    if isinstance(value, list):
        return [leaf for element in value for leaf in _flatten(element)]
    return [value]


def _answer_text(value: Any, keymap: KeyMap, choices: Optional[List[Choice]]) -> str:
    if isinstance(value, bool):
        return keymap.bool_labels[0] if value else keymap.bool_labels[1]
    if isinstance(value, int) and choices:
        if not 0 <= value < len(choices):
            raise ValueError(f"answer index {value} outside {len(choices)} choices")
        return choices[value].label
    return str(value)


def _coerce_answers(value: Any, keymap: KeyMap, choices: Optional[List[Choice]]) -> List[str]:
    if isinstance(value, str) and value.startswith("["):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass
    answers = [_answer_text(v, keymap, choices) for v in _flatten(value) if v is not None]
    answers = [a for a in answers if a.strip()]
    if not answers:
        raise ValueError("no gold answers")
    return answers


def _coerce_choices(value: Any) -> List[Choice]:
    if isinstance(value, dict) and "label" in value and "text" in value:
        return [Choice(label=str(label), text=str(text)) for label, text in zip(value["label"], value["text"])]
    if isinstance(value, dict):
        return [Choice(label=str(label), text=str(text)) for label, text in value.items()]
    if isinstance(value, list):
        choices = []
        for i, entry in enumerate(value):
            if isinstance(entry, dict):
                choices.append(Choice(label=str(entry["label"]), text=str(entry["text"])))
            else:
                choices.append(Choice(label=string.ascii_uppercase[i], text=str(entry)))
        return choices
    raise ValueError(f"unsupported choices value: {type(value).__name__}")


def _coerce_short_answers(value: Any) -> List[List[str]]:
    if not isinstance(value, list):
        value = [value]
    sets = []
    for entry in value:
        aliases = [str(a) for a in _flatten(entry) if a is not None and str(a).strip()]
        if aliases:
            sets.append(aliases)
    return sets


def _is_short_scalar(value: Any) -> bool:
    if isinstance(value, str):
        return len(value) <= 256
    return isinstance(value, (int, float, bool))


def adapt_record(record: Any, keymap: KeyMap, index: int) -> BenchmarkItem:
    """
    Map one source record onto a BenchmarkItem.

    Raises:
        KeyError: Mapped key missing
        ValueError: Value cannot be coerced
    """
    if not isinstance(record, dict):
        raise ValueError("record is not a JSON object")
    choices = _coerce_choices(resolve_path(record, keymap.choices_key)) if keymap.choices_key else None
    short_answers = None
    if keymap.short_answers_key:
        short_answers = _coerce_short_answers(resolve_path(record, keymap.short_answers_key))
    item_id = str(resolve_path(record, keymap.id_key)) if keymap.id_key else str(index)

    keys = (keymap.question_key, keymap.answers_key, keymap.choices_key, keymap.id_key, keymap.short_answers_key)
    mapped = {k.split(".")[0] for k in keys if k}
    metadata = {k: v for k, v in record.items() if k not in mapped and _is_short_scalar(v)}
    return BenchmarkItem(
        id=item_id,
        question=str(resolve_path(record, keymap.question_key)),
        answers=_coerce_answers(resolve_path(record, keymap.answers_key), keymap, choices),
        choices=choices,
        short_answers=short_answers,
        metadata=metadata,
    )


def load_dataset(path: Union[str, Path], keymap: Optional[KeyMap] = None) -> List[BenchmarkItem]:
    """
    Load a JSONL dataset in file order.

    Raises:
        DatasetError: Unreadable line or missing mapped key, with the line number
    """
    keymap = keymap or KeyMap()
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset not found: {path}")

    items: List[BenchmarkItem] = []
    with path.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"invalid JSON: {e.msg}", line=line_no) from None
            try:
                items.append(adapt_record(record, keymap, index=len(items)))
            except KeyError as e:
                raise DatasetError(f"missing key {e.args[0]!r}", line=line_no) from None
            except (ValueError, ValidationError) as e:
                raise DatasetError(str(e).splitlines()[0], line=line_no) from None

    ids = [item.id for item in items]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"{path}: duplicate item ids")
    logger.info(f"Loaded {len(items)} items from {path}")
    return items


def sample_sequential(items: Sequence[BenchmarkItem], n: int) -> List[BenchmarkItem]:
    """First min(n, len(items)) items, in order"""
    if n < 1:
        raise UsageError(f"sample size must be >= 1, got {n}")
    return list(items[:n])
