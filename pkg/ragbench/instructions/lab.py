"""
Instruction Lab
Loads the system / task / algorithm instruction pools from YAML, validates
their placeholders and renders combined prompts deterministically.
"""

from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import yaml
from loguru import logger

from ragbench.errors import ConfigError

from .models import InstructionPool, InstructionTemplate, PromptAssembly

DEFAULT_INSTRUCTIONS = "instructions.yaml"


class InstructionLoadError(ConfigError):
    """Pool file is malformed"""

    def __init__(self, message: str, template: Optional[str] = None, placeholder: Optional[str] = None):
        super().__init__(message)
        self.template = template
        self.placeholder = placeholder


class RenderError(ConfigError):
    """A placeholder has no bound value"""

    def __init__(self, message: str, template: str, placeholder: str):
        super().__init__(message)
        self.template = template
        self.placeholder = placeholder


# =============================================================================
# Binding Formatters
# =============================================================================

def _field(item: Any, name: str) -> Any:
    return item.get(name, "") if isinstance(item, Mapping) else getattr(item, name, "")


def format_passages(passages: Iterable[Any]) -> str:
    """Numbered blocks "[i] title\\ntext" separated by blank lines"""
    return "\n\n".join(f"[{i}] {_field(p, 'title')}\n{_field(p, 'text')}" for i, p in enumerate(passages, start=1))


def format_choices(choices: Iterable[Any]) -> str:
    """One "LABEL. text" line per choice"""
    return "\n".join(f"{_field(c, 'label')}. {_field(c, 'text')}" for c in choices)


_FORMATTERS = {
    "passages": format_passages,
    "choices": format_choices,
}


def _coerce(name: str, value: Any) -> str:
    if name in _FORMATTERS and not isinstance(value, str):
        return _FORMATTERS[name](value)
    return str(value)


class _StrictBindings(dict):
    def __missing__(self, key):
        raise KeyError(key)


# =============================================================================
# Store
# =============================================================================

class InstructionStore:
    """
    Immutable, validated instruction pools.

    Usage:
        store = load_pools("instructions.yaml")
        prompt = store.render(PromptAssembly(system="default", task="popqa",
                                             algorithm="naive_rag",
                                             bindings={"query": q, "passages": hits}))
    """

    def __init__(self, templates: Iterable[InstructionTemplate], source: Optional[str] = None):
        self.source = source
        self._pools: Dict[InstructionPool, Dict[str, InstructionTemplate]] = {pool: {} for pool in InstructionPool}
        for tpl in templates:
            pool = self._pools[tpl.pool]
            if tpl.name in pool:
                raise InstructionLoadError(f"duplicate {tpl.pool.value} instruction {tpl.name!r}", template=tpl.name)
            undeclared = tpl.undeclared()
            if undeclared:
                raise InstructionLoadError(
                    f"{tpl.pool.value} instruction {tpl.name!r} uses undeclared placeholder {undeclared[0]!r}",
                    template=tpl.name,
                    placeholder=undeclared[0],
                )
            pool[tpl.name] = tpl

    def __len__(self) -> int:
        return sum(len(pool) for pool in self._pools.values())

    def names(self, pool: Union[InstructionPool, str]) -> List[str]:
        return sorted(self._pools[InstructionPool(pool)])

    def get(self, pool: Union[InstructionPool, str], name: str) -> InstructionTemplate:
        pool = InstructionPool(pool)
        try:
            return self._pools[pool][name]
        except KeyError:
            raise ConfigError(
                f"unknown {pool.value} instruction {name!r}",
                fields=[f"{pool.value}_instruction: choose one of {self.names(pool)}"],
            ) from None

    def has(self, pool: Union[InstructionPool, str], name: str) -> bool:
        return name in self._pools[InstructionPool(pool)]

    # =========================================================================
    # Rendering
    # =========================================================================

    @staticmethod
    def _fill(tpl: InstructionTemplate, bindings: Mapping[str, Any]) -> str:
        values = _StrictBindings({k: _coerce(k, v) for k, v in bindings.items() if k in tpl.fields})
        try:
            return tpl.template.format_map(values)
        except KeyError as e:
            placeholder = e.args[0]
            raise RenderError(
                f"placeholder {placeholder!r} of {tpl.pool.value} instruction {tpl.name!r} is unbound",
                template=tpl.name,
                placeholder=placeholder,
            ) from None

    def render(self, assembly: PromptAssembly) -> str:
        """
        Render an assembly into one prompt.

        The task template is rendered into the algorithm template's {task}
        placeholder; algorithm templates without one (query rewriting, for
        instance) do not carry the task text. The system text, when selected,
        precedes the algorithm text after a blank line.

        Raises:
            RenderError: Any placeholder left unbound
        """
        task_tpl = self.get(InstructionPool.TASK, assembly.task)
        algo_tpl = self.get(InstructionPool.ALGORITHM, assembly.algorithm)

        bindings = dict(assembly.bindings)
        if "task" in algo_tpl.fields and "task" not in bindings:
            bindings["task"] = self._fill(task_tpl, assembly.bindings)
        algo_text = self._fill(algo_tpl, bindings)

        if not assembly.system:
            return algo_text
        system_text = self._fill(self.get(InstructionPool.SYSTEM, assembly.system), assembly.bindings)
        return "\n\n".join(p for p in (system_text, algo_text) if p)


# =============================================================================
# Loading
# =============================================================================

def _parse_pools(raw: Any, source: str) -> List[InstructionTemplate]:
    if not isinstance(raw, dict):
        raise InstructionLoadError(f"{source}: expected a mapping with pools {[p.value for p in InstructionPool]}")
    unknown = set(raw) - {p.value for p in InstructionPool}
    if unknown:
        raise InstructionLoadError(f"{source}: unknown pool(s) {sorted(unknown)}")

    templates: List[InstructionTemplate] = []
    for pool in InstructionPool:
        for i, entry in enumerate(raw.get(pool.value) or []):
            if not isinstance(entry, dict) or "name" not in entry or "template" not in entry:
                raise InstructionLoadError(f"{source}: {pool.value}[{i}] needs 'name' and 'template'")
            templates.append(
                InstructionTemplate(
                    name=str(entry["name"]),
                    pool=pool,
                    template=str(entry["template"]),
                    placeholders=[str(p) for p in entry.get("placeholders") or []],
                )
            )
    return templates


def load_pools(path: Optional[Union[str, Path]] = None) -> InstructionStore:
    """
    Load instruction pools from YAML (the packaged defaults when path is None).

    Raises:
        InstructionLoadError: Malformed file, duplicate name, undeclared placeholder
    """
    if path is None:
        text = resources.files("ragbench.instructions").joinpath(DEFAULT_INSTRUCTIONS).read_text(encoding="utf-8")
        source = f"<packaged {DEFAULT_INSTRUCTIONS}>"
    else:
        path = Path(path)
        if not path.is_file():
            raise InstructionLoadError(f"instruction file not found: {path}")
        text = path.read_text(encoding="utf-8")
        source = str(path)

    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise InstructionLoadError(f"{source}: invalid YAML: {e}") from e

    store = InstructionStore(_parse_pools(raw, source), source=source)
    logger.info(
        f"Loaded {len(store)} instructions from {source} "
        + ", ".join(f"{p.value}={len(store.names(p))}" for p in InstructionPool)
    )
    return store


def check_names(store: InstructionStore, system: Optional[str], task: str, algorithms: Sequence[str]) -> None:
    """Raise ConfigError listing every unknown instruction name"""
    problems = []
    if system and not store.has(InstructionPool.SYSTEM, system):
        problems.append(f"system_instruction: unknown {system!r}")
    if not store.has(InstructionPool.TASK, task):
        problems.append(f"task_instruction: unknown {task!r}")
    for name in algorithms:
        if not store.has(InstructionPool.ALGORITHM, name):
            problems.append(f"algorithm_instruction: unknown {name!r}")
    if problems:
        raise ConfigError("instruction names do not resolve", fields=problems)
