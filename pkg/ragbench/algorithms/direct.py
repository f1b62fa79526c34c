"""
Direct generation: the no-retrieval baseline.
"""

from typing import Any, Dict

from .models import GenerationTrack
from .naive import NaiveRag


class DirectGeneration(NaiveRag):
    """One generation from the task prompt alone"""

    name = "direct"
    default_instruction = "direct"
    requires_retriever = False

    async def infer(self, query: str, bindings: Dict[str, Any], track: GenerationTrack) -> str:
        output = await self.generate(track, self.find_instruction(bindings))
        return output.text.strip()
