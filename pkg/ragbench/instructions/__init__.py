"""
Instruction Lab
System / task / algorithm instruction pools and prompt rendering.
"""

from .models import InstructionPool, InstructionTemplate, PromptAssembly, template_fields
from .lab import (
    InstructionLoadError,
    InstructionStore,
    RenderError,
    check_names,
    format_choices,
    format_passages,
    load_pools,
)

__all__ = [
    # Models
    "InstructionPool",
    "InstructionTemplate",
    "PromptAssembly",
    "template_fields",
    # Lab
    "InstructionLoadError",
    "InstructionStore",
    "RenderError",
    "check_names",
    "format_choices",
    "format_passages",
    "load_pools",
]
