"""
Active RAG: forward-looking retrieval triggered by low-confidence tokens.

The answer is built one sentence at a time. Each sentence is drafted without
new context; if any of its tokens falls below filter_prob, the tokens below
masked_prob are masked out, the remainder becomes the retrieval query, and the
sentence is regenerated once with the retrieved passages.
"""

from typing import Any, Dict, List, Sequence, Tuple

from ragbench.generation.models import GenerationOutput, GenParams, TokenLogprob

from .models import GenerationTrack
from .naive import NaiveRag
from .segment import sentence_segment


def first_sentence(output: GenerationOutput) -> Tuple[str, List[TokenLogprob], int]:
    """
    First sentence of an output, the tokens that produced it, and how many
    sentences the output holds.
    """
    sentences = sentence_segment(output.text)
    if not sentences:
        return "", [], 0
    sentence = sentences[0]
    covered, consumed = [], 0
    for token in output.tokens:
        if consumed >= len(sentence):
            break
        covered.append(token)
        consumed += len(token.token)
    return sentence, covered, len(sentences)


def is_low_confidence(probs: Sequence[float], filter_prob: float) -> bool:
    """Retrieval fires iff some token probability is below filter_prob"""
    return bool(probs) and min(probs) < filter_prob


def implicit_query(tokens: Sequence[TokenLogprob], masked_prob: float) -> str:
    """The sentence with every token of probability below masked_prob removed"""
    return "".join(t.token for t in tokens if t.prob >= masked_prob).strip()


class ActiveRag(NaiveRag):
    """
    Sentence-level active retrieval.

    Stops when the generator has nothing beyond the current sentence, after
    active_rag.max_answer_sentences sentences, or when the generation token
    budget (generation.max_new_tokens) is spent.
    """

    name = "active_rag"
    default_instruction = "active_rag"

    def init(self) -> None:
        self.gateway.check_logprobs(self.config.generator_role)
        generation = self.config.generation
        self.params: GenParams = generation.model_copy(update={"logprobs_top_k": max(1, generation.logprobs_top_k)})

    def instruction_names(self) -> List[str]:
        return [self.algorithm_instruction, self.config.active_rag.retrieved_instruction]

    async def infer(self, query: str, bindings: Dict[str, Any], track: GenerationTrack) -> str:
        cfg = self.config.active_rag
        draft = ""
        used = 0

        for index in range(cfg.max_answer_sentences):
            remaining = self.params.max_new_tokens - used
            if remaining <= 0:
                self.decide(track, "token_budget", value=used)
                break
            params = self.params.model_copy(update={"max_new_tokens": remaining})

            output = await self.generate(track, self.find_instruction({**bindings, "draft": draft}), params)
            sentence, tokens, count = first_sentence(output)
            if not sentence.strip():
                break

            probs = [t.prob for t in tokens]
            triggered = is_low_confidence(probs, cfg.filter_prob)
            self.decide(
                track,
                "confidence",
                value=triggered,
                sentence=sentence,
                min_prob=min(probs) if probs else None,
                filter_prob=cfg.filter_prob,
            )

            if triggered:
                masked = implicit_query(tokens, cfg.masked_prob)
                passages = await self.retrieve(track, masked or query)
                prompt = self.find_instruction(
                    {**bindings, "passages": passages, "draft": draft},
                    algorithm=cfg.retrieved_instruction,
                )
                output = await self.generate(track, prompt, params)
                sentence, tokens, count = first_sentence(output)
                if not sentence.strip():
                    self.decide(track, "empty_regeneration", value=index)
                    break

            draft += sentence
            used += max(1, len(tokens))
            if count <= 1:
                break
        else:
            self.decide(track, "sentence_limit", value=cfg.max_answer_sentences)

        return draft.strip()
