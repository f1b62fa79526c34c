"""
Self-RAG: reflection-token guided retrieval with segment-level beam search.

At every segment boundary the generator is asked whether to retrieve. When it
does, one candidate segment is generated per retrieved passage and scored from
the probabilities of the relevance, support and utility reflection tokens; the
beam_width best partial answers are extended until they emit a utility token
or max_depth segments have been generated.
"""

import re
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict

from ragbench.generation.gateway import candidate_probability, find_position, is_degraded, normalize
from ragbench.generation.models import GenerationOutput, GenParams
from ragbench.retrieval.models import Passage

from .models import GenerationTrack, ReflectionVocab, SelfRagMode
from .naive import NaiveRag

REFLECTION_TOP_K = 5
NO_PASSAGE = -1

SUPPORT_CREDIT = (1.0, 0.5, 0.0)


# =============================================================================
# Critique
# =============================================================================

class Critique(BaseModel):
    """Reflection-token reading of one candidate segment"""
    model_config = ConfigDict(frozen=True)

    p_rel: float = 0.0
    p_sup: float = 0.0
    p_use: float = 0.0
    score: float = 0.0
    degraded: Tuple[str, ...] = ()


def critique_score(
    p_relevant: float,
    support: Sequence[float],
    utility: Sequence[float],
    w_rel: float = 1.0,
    w_sup: float = 1.0,
    w_use: float = 0.5,
) -> Tuple[float, float, float]:
    """
    Weighted critique score of one segment.

    Args:
        p_relevant: Probability of the relevant token
        support: Probabilities of fully / partially / no support
        utility: Probabilities of utility grades 1..5

    Returns:
        (score, p_sup, p_use) where p_sup credits full support 1.0 and partial
        0.5, and p_use is the expected grade rescaled to [0, 1]
    """
    p_sup = sum(credit * p for credit, p in zip(SUPPORT_CREDIT, support))
    p_use = sum((grade / 4.0) * p for grade, p in enumerate(utility))
    return w_rel * p_relevant + w_sup * p_sup + w_use * p_use, p_sup, p_use


def read_group(output: GenerationOutput, group: Sequence[str]) -> Tuple[Optional[List[float]], bool]:
    """
    Normalized probabilities over a reflection group at the first position
    where one of its tokens was generated.

    Returns:
        (probabilities in group order or None when no group token was
        generated, degraded flag)
    """
    position = find_position(output, group)
    if position is None:
        return None, True
    raw = candidate_probability(output, position, group)
    dist = normalize(raw)
    return [dist[token] for token in group], is_degraded(raw)


class Beam(BaseModel):
    """One partial answer"""
    model_config = ConfigDict(frozen=True)

    score: float = 0.0
    path: Tuple[int, ...] = ()
    order: Tuple[int, ...] = ()
    text: str = ""
    segments: Tuple[str, ...] = ()
    done: bool = False

    def sort_key(self) -> Tuple[float, Tuple[int, ...], Tuple[int, ...]]:
        return (-self.score, self.path, self.order)

    def extend(self, score: float, passage_id: int, order: int, text: str, segment: str, done: bool) -> "Beam":
        return Beam(
            score=self.score + score,
            path=self.path + (passage_id,),
            order=self.order + (order,),
            text=self.text + text,
            segments=self.segments + (segment,),
            done=done,
        )


def select_beams(candidates: Sequence[Beam], width: int) -> List[Beam]:
    """Highest cumulative score first; lower passage ids, then earlier candidates, break ties"""
    return sorted(candidates, key=Beam.sort_key)[:width]


# =============================================================================
# Algorithm
# =============================================================================

class SelfRag(NaiveRag):
    """
    Self-RAG inference in always / adaptive / no retrieval mode.

    Usage:
        config.self_rag.mode = SelfRagMode.ALWAYS
        answer, track = await SelfRag(config, gateway, retriever, store).run(query)
    """

    name = "self_rag"
    default_instruction = "self_rag"

    def init(self) -> None:
        cfg = self.config.self_rag
        self.gateway.check_logprobs(self.config.generator_role)
        self.mode = SelfRagMode(cfg.mode)
        self.vocab: ReflectionVocab = cfg.vocab
        generation = self.config.generation
        self.params: GenParams = generation.model_copy(
            update={"logprobs_top_k": max(REFLECTION_TOP_K, generation.logprobs_top_k)}
        )
        self.decision_params: GenParams = self.params.model_copy(update={"max_new_tokens": 1})
        tokens = sorted(self.vocab.all_tokens(), key=len, reverse=True)
        self._token_re = re.compile("|".join(re.escape(t) for t in tokens if t))

    # =========================================================================
    # Helpers
    # =========================================================================

    def clean(self, text: str) -> str:
        """Segment text with reflection tokens removed"""
        return " ".join(self._token_re.sub(" ", text).split())

    def is_final(self, output: GenerationOutput) -> bool:
        return not output.text.strip() or any(token in output.text for token in self.vocab.utility)

    def paragraph(self, passage: Passage) -> str:
        return f"{self.vocab.retrieval}{self.vocab.paragraph_open}{passage.title}\n{passage.text}{self.vocab.paragraph_close}"

    def critique(self, output: GenerationOutput) -> Critique:
        cfg = self.config.self_rag
        vocab = self.vocab
        degraded: List[str] = []

        rel, rel_degraded = read_group(output, [vocab.relevant, vocab.irrelevant])
        sup, sup_degraded = read_group(output, vocab.support)
        use, use_degraded = read_group(output, vocab.utility)
        for name, flag in (("relevance", rel_degraded), ("support", sup_degraded), ("utility", use_degraded)):
            if flag:
                degraded.append(name)

        score, p_sup, p_use = critique_score(
            rel[0] if rel else 0.0,
            sup or [0.0, 0.0, 0.0],
            use or [0.0] * 5,
            cfg.w_rel,
            cfg.w_sup,
            cfg.w_use,
        )
        return Critique(p_rel=rel[0] if rel else 0.0, p_sup=p_sup, p_use=p_use, score=score, degraded=tuple(degraded))

    async def should_retrieve(self, track: GenerationTrack, prompt: str) -> bool:
        if self.mode == SelfRagMode.ALWAYS:
            return True
        cfg = self.config.self_rag
        output = await self.generate(track, prompt, self.decision_params)
        group = [self.vocab.retrieval, self.vocab.no_retrieval]
        if output.tokens:
            raw = candidate_probability(output, 0, group)
        else:
            raw = {token: 0.0 for token in group}
        p_yes = normalize(raw)[self.vocab.retrieval]
        retrieve = p_yes > cfg.threshold
        self.decide(track, "retrieve", value=retrieve, p_yes=p_yes, threshold=cfg.threshold, degraded=is_degraded(raw))
        return retrieve

    # =========================================================================
    # Search
    # =========================================================================

    async def _continue_without(self, track: GenerationTrack, prompt: str, beam: Beam) -> Beam:
        output = await self.generate(track, prompt + self.vocab.no_retrieval, self.params)
        return beam.extend(
            0.0, NO_PASSAGE, 0, self.vocab.no_retrieval + output.text, self.clean(output.text), self.is_final(output)
        )

    async def _expand(self, track: GenerationTrack, query: str, base: str, beam: Beam, depth: int) -> List[Beam]:
        prompt = base + beam.text
        if not await self.should_retrieve(track, prompt):
            return [await self._continue_without(track, prompt, beam)]

        passages = await self.retrieve(track, query)
        if not passages:
            self.decide(track, "empty_retrieval", value=True, depth=depth)
            return [await self._continue_without(track, prompt, beam)]

        children = []
        for order, passage in enumerate(passages):
            output = await self.generate(track, prompt + self.paragraph(passage), self.params)
            critique = self.critique(output)
            self.decide(
                track,
                "critique",
                value=critique.score,
                depth=depth,
                passage_id=passage.id,
                p_rel=critique.p_rel,
                p_sup=critique.p_sup,
                p_use=critique.p_use,
            )
            if critique.degraded:
                self.decide(track, "degraded_confidence", value=list(critique.degraded), passage_id=passage.id)
            children.append(
                beam.extend(
                    critique.score,
                    passage.id,
                    order,
                    self.vocab.retrieval + output.text,
                    self.clean(output.text),
                    self.is_final(output),
                )
            )
        return children

    async def infer(self, query: str, bindings: Dict[str, Any], track: GenerationTrack) -> str:
        cfg = self.config.self_rag
        base = self.find_instruction(bindings)

        if self.mode == SelfRagMode.NO:
            output = await self.generate(track, base + self.vocab.no_retrieval, self.params)
            return self.clean(output.text)

        beams = [Beam()]
        for depth in range(1, cfg.max_depth + 1):
            candidates: List[Beam] = []
            for beam in beams:
                if beam.done:
                    candidates.append(beam)
                else:
                    candidates.extend(await self._expand(track, query, base, beam, depth))
            beams = select_beams(candidates, cfg.beam_width)
            self.decide(
                track,
                "beam",
                value=[list(b.path) for b in beams],
                depth=depth,
                scores=[b.score for b in beams],
            )
            if all(b.done for b in beams):
                break
        else:
            self.decide(track, "depth_exhausted", value=cfg.max_depth)

        best = beams[0]
        return " ".join(s for s in best.segments if s)
