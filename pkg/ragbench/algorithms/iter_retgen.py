"""
ITER-RETGEN: alternate retrieval and generation, feeding each generation back
into the next retrieval query.
"""

from typing import Any, Dict

from .models import GenerationTrack
from .naive import NaiveRag


class IterRetGen(NaiveRag):
    """Exactly max_iteration retrievals and generations; the last generation answers"""

    name = "iter_retgen"
    default_instruction = "iter_retgen"

    @staticmethod
    def next_query(query: str, previous: str) -> str:
        return f"{query} {previous}"

    async def infer(self, query: str, bindings: Dict[str, Any], track: GenerationTrack) -> str:
        generation = ""
        for iteration in range(1, self.config.iter_retgen.max_iteration + 1):
            retrieval_query = query if iteration == 1 else self.next_query(query, generation)
            passages = await self.retrieve(track, retrieval_query)
            output = await self.generate(track, self.find_instruction({**bindings, "passages": passages}))
            generation = output.text.strip()
        return generation
