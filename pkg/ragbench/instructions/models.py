"""
Instruction Models
Templates in the three instruction pools and the assembly that combines them.
"""

import string
from enum import Enum
from typing import Any, Dict, List, Optional, Set

from pydantic import BaseModel, ConfigDict, Field


class InstructionPool(str, Enum):
    """The three instruction pools"""
    SYSTEM = "system"
    TASK = "task"
    ALGORITHM = "algorithm"


def template_fields(template: str) -> Set[str]:
    """Placeholder names used by a str.format template"""
    return {field for _, field, _, _ in string.Formatter().parse(template) if field}


class InstructionTemplate(BaseModel):
    """One named template with declared placeholders"""
    model_config = ConfigDict(frozen=True)

    name: str
    pool: InstructionPool
    template: str
    placeholders: List[str] = Field(default_factory=list)

    @property
    def fields(self) -> Set[str]:
        return template_fields(self.template)

    def undeclared(self) -> List[str]:
        return sorted(self.fields - set(self.placeholders))


class PromptAssembly(BaseModel):
    """System + task + algorithm templates and their bindings"""
    system: Optional[str] = None
    task: str
    algorithm: str
    bindings: Dict[str, Any] = Field(default_factory=dict)

    def names(self) -> Dict[str, Optional[str]]:
        return {"system": self.system, "task": self.task, "algorithm": self.algorithm}
