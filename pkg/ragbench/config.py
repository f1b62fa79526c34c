"""
Configuration
YAML run configs validated into RunConfig, dotted --set overrides, comparison
batch files, process settings from the environment, and logging setup.
"""

import copy
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ragbench.algorithms import ALGORITHMS, AlgorithmConfig
from ragbench.errors import ConfigError
from ragbench.evaluation.models import KeyMap
from ragbench.generation.models import EndpointPool


# =============================================================================
# Process Settings
# =============================================================================

class RagBenchSettings(BaseSettings):
    """Environment (RAGBENCH_*) and .env driven defaults"""
    model_config = SettingsConfigDict(env_prefix="RAGBENCH_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    output_dir: Optional[str] = None
    index_path: Optional[str] = None
    cache_path: Optional[str] = None
    retriever_addr: str = "127.0.0.1:8765"


def get_settings() -> RagBenchSettings:
    return RagBenchSettings()


def configure_logging(level: str = "INFO") -> None:
    """Single stderr sink at the given level"""
    logger.remove()
    logger.add(
        sys.stderr,
        level=level.upper(),
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan> - {message}",
    )


# =============================================================================
# Run Configuration
# =============================================================================

class RetrieverSettings(BaseModel):
    """Remote endpoint or local index; neither means no retrieval"""
    model_config = ConfigDict(extra="forbid")

    endpoint: Optional[str] = None
    index_path: Optional[str] = None
    cache_path: Optional[str] = None
    max_cache_entries: Optional[int] = Field(None, ge=1)
    timeout: float = Field(30.0, gt=0)


class DatasetSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str
    keymap: Optional[KeyMap] = None


class RunConfig(BaseModel):
    """Everything one run needs; the effective copy is echoed into its report"""
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    algorithm: str = "naive"
    rag: AlgorithmConfig = Field(default_factory=AlgorithmConfig)
    generators: EndpointPool = Field(default_factory=EndpointPool)
    retriever: RetrieverSettings = Field(default_factory=RetrieverSettings)
    instructions_path: Optional[str] = None
    benchmark: Optional[str] = None
    presets_path: Optional[str] = None
    dataset: Optional[DatasetSettings] = None
    sample_size: int = Field(500, ge=1)
    output_dir: str = "runs"
    max_concurrency: int = Field(1, ge=1)
    save_tracks: bool = False

    @field_validator("algorithm")
    @classmethod
    def _known_algorithm(cls, value: str) -> str:
        if value not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {value!r}; choose one of {list(ALGORITHMS)}")
        return value


# =============================================================================
# Loading
# =============================================================================

def _validation_fields(error: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in error.errors()]


def _read_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def parse_override(override: str) -> Tuple[str, Any]:
    """'a.b=c' -> ('a.b', yaml-parsed c)"""
    key, sep, value = override.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"invalid override {override!r}", fields=["--set: expected dotted.key=value"])
    try:
        parsed = yaml.safe_load(value) if value.strip() else ""
    except yaml.YAMLError:
        parsed = value
    return key.strip(), parsed


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply dotted-path overrides to a raw config mapping (in place)"""
    for override in overrides:
        key, value = parse_override(override)
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[parts[-1]] = value
    return raw


def validate_config(raw: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError("invalid run config", fields=_validation_fields(e)) from None


def load_config(path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Load and validate a run config.

    Usage:
        config = load_config("configs/run.example.yaml", ["algorithm=iter_retgen"])

    Raises:
        ConfigError: Unreadable file or invalid fields (field-level messages)
    """
    raw = _read_yaml(path) if path else {}
    settings = get_settings()
    if settings.output_dir and "output_dir" not in raw:
        raw["output_dir"] = settings.output_dir
    config = validate_config(apply_overrides(raw, overrides))
    logger.debug(f"Loaded run config (algorithm={config.algorithm}, benchmark={config.benchmark})")
    return config


# =============================================================================
# Comparison Batches
# =============================================================================

class BatchMember(BaseModel):
    """One algorithm in a comparison batch"""
    model_config = ConfigDict(extra="forbid")

    name: str
    algorithm: str
    set: List[str] = Field(default_factory=list)


def load_batch(path: Union[str, Path], overrides: Sequence[str] = ()) -> List[Tuple[str, RunConfig]]:
    """
    Load a batch file: a `base` run config (inline mapping or path) and an
    `algorithms` list of names or {name, algorithm, set} entries.

    Overrides apply to the base; each member's `set` applies on top.

    Raises:
        ConfigError: Invalid base, member or duplicate member name
    """
    path = Path(path)
    raw = _read_yaml(path)
    base = raw.get("base", {})
    if isinstance(base, str):
        base_path = Path(base)
        base = _read_yaml(base_path if base_path.is_absolute() else path.parent / base_path)
    if not isinstance(base, dict):
        raise ConfigError(f"{path}: base must be a mapping or a path")
    entries = raw.get("algorithms") or []
    if not entries:
        raise ConfigError(f"{path}: algorithms list is empty")

    members: List[Tuple[str, RunConfig]] = []
    seen = set()
    for i, entry in enumerate(entries):
        if isinstance(entry, str):
            entry = {"name": entry, "algorithm": entry}
        try:
            member = BatchMember.model_validate(entry)
        except ValidationError as e:
            raise ConfigError(f"{path}: invalid algorithms[{i}]", fields=_validation_fields(e)) from None
        if member.name in seen:
            raise ConfigError(f"{path}: duplicate batch member {member.name!r}")
        seen.add(member.name)

        member_raw = copy.deepcopy(base)
        apply_overrides(member_raw, list(overrides) + [f"algorithm={member.algorithm}"] + member.set)
        members.append((member.name, validate_config(member_raw)))
    return members
