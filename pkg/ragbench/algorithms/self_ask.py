"""
Self-Ask: the generator decomposes the question into follow-up questions, each
answered with retrieved context, until it states a final answer.
"""

from typing import Any, Dict, List, Optional, Tuple

from .models import GenerationTrack
from .naive import NaiveRag


class SelfAsk(NaiveRag):
    """
    Scratchpad loop bounded by self_ask.max_iteration.

    Each iteration generates a continuation of the scratchpad. A final-answer
    marker ends the loop; a follow-up marker triggers one retrieval and one
    intermediate-answer generation, both appended to the scratchpad. Without a
    final marker the last continuation is returned verbatim.
    """

    name = "self_ask"
    default_instruction = "self_ask"

    def instruction_names(self) -> List[str]:
        return [self.algorithm_instruction, self.config.self_ask.intermediate_instruction]

    @staticmethod
    def _after(text: str, marker: str) -> Optional[str]:
        index = text.find(marker)
        if index < 0:
            return None
        return text[index + len(marker):]

    def parse(self, text: str) -> Tuple[Optional[str], Optional[str]]:
        """(final answer, follow-up question) found in a continuation"""
        cfg = self.config.self_ask
        final = self._after(text, cfg.final_marker)
        follow_up = self._after(text, cfg.follow_up_marker)
        if follow_up is not None:
            follow_up = next((line.strip() for line in follow_up.splitlines() if line.strip()), "")
        return (final.strip() if final is not None else None), follow_up

    def _strip_intermediate(self, text: str) -> str:
        marker = self.config.self_ask.intermediate_marker
        text = text.strip()
        if text.startswith(marker):
            text = text[len(marker):].strip()
        return text

    async def infer(self, query: str, bindings: Dict[str, Any], track: GenerationTrack) -> str:
        cfg = self.config.self_ask
        params = self.config.generation.model_copy(
            update={"stop": (*self.config.generation.stop, cfg.intermediate_marker)}
        )
        scratchpad = ""
        last = ""

        for iteration in range(1, cfg.max_iteration + 1):
            output = await self.generate(track, self.find_instruction({**bindings, "scratchpad": scratchpad}), params)
            last = output.text
            final, follow_up = self.parse(last)

            if final is not None:
                if follow_up is not None:
                    self.decide(track, "both_markers", value="final", iteration=iteration)
                return final

            if not follow_up:
                self.decide(track, "no_marker", value=None, iteration=iteration)
                scratchpad += last.strip() + "\n"
                continue

            passages = await self.retrieve(track, follow_up)
            prompt = self.find_instruction(
                {**bindings, "query": follow_up, "passages": passages},
                algorithm=cfg.intermediate_instruction,
            )
            intermediate = self._strip_intermediate((await self.generate(track, prompt)).text)
            scratchpad += f"{cfg.follow_up_marker} {follow_up}\n{cfg.intermediate_marker} {intermediate}\n"

        self.decide(track, "budget_exhausted", value=cfg.max_iteration)
        return last
