"""
Benchmark presets loaded from YAML (the packaged benchmarks.yaml by default).
"""

from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Union

import yaml
from pydantic import ValidationError

from ragbench.errors import ConfigError

from .models import BenchmarkPreset

DEFAULT_PRESETS = "benchmarks.yaml"


def load_presets(path: Optional[Union[str, Path]] = None) -> Dict[str, BenchmarkPreset]:
    """
    Raises:
        ConfigError: Unreadable file or invalid preset
    """
    if path is None:
        text = resources.files("ragbench.evaluation").joinpath(DEFAULT_PRESETS).read_text(encoding="utf-8")
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"preset file not found: {path}")
        text = path.read_text(encoding="utf-8")

    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid preset YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("preset file must map benchmark names to presets")

    presets = {}
    for name, body in raw.items():
        try:
            presets[str(name)] = BenchmarkPreset(name=str(name), **(body or {}))
        except ValidationError as e:
            raise ConfigError(
                f"invalid preset {name!r}",
                fields=[f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()],
            ) from None
    return presets


def get_preset(name: str, path: Optional[Union[str, Path]] = None) -> BenchmarkPreset:
    presets = load_presets(path)
    try:
        return presets[name]
    except KeyError:
        raise ConfigError(f"unknown benchmark {name!r}", fields=[f"benchmark: choose one of {sorted(presets)}"]) from None
