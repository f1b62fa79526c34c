"""
Rewrite-Retrieve-Read: rewrite the question into a search query, retrieve with
it, then read the passages.
"""

from typing import Any, Dict, List

from .models import GenerationTrack
from .naive import NaiveRag


class RewriteRetrieveRead(NaiveRag):
    """
    Generation, retrieval and generation, in that order; the rewritten query
    is recorded in a decision step.

    The rewrite may be served by a separate endpoint through rrr.rewriter_role.
    """

    name = "rrr"
    default_instruction = "rrr"

    @property
    def rewriter_role(self) -> str:
        return self.config.rrr.rewriter_role or self.config.generator_role

    def instruction_names(self) -> List[str]:
        return [self.config.rrr.rewrite_instruction, self.algorithm_instruction]

    def roles(self) -> List[str]:
        return sorted({self.config.generator_role, self.rewriter_role})

    async def infer(self, query: str, bindings: Dict[str, Any], track: GenerationTrack) -> str:
        prompt = self.find_instruction(bindings, algorithm=self.config.rrr.rewrite_instruction)
        rewrite = await self.generate(track, prompt, role=self.rewriter_role)
        rewritten = rewrite.text.strip().splitlines()[0].strip() if rewrite.text.strip() else ""

        if rewritten:
            self.decide(track, "rewrite", value=rewritten, original=query)
        else:
            rewritten = query
            self.decide(track, "rewrite_fallback", value=query, original=query)

        passages = await self.retrieve(track, rewritten)
        output = await self.generate(track, self.find_instruction({**bindings, "passages": passages}))
        return output.text.strip()
