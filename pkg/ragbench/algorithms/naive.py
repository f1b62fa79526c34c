"""
Naive RAG and the algorithm base class.

Every algorithm is a NaiveRag subclass that overrides init() for its own state
and infer() for its control flow; retrieval, generation and prompt assembly go
through the shared helpers so tracks and alignment stay uniform.
"""

from typing import Any, Dict, List, Optional, Tuple, Union

from loguru import logger

from ragbench.errors import ConfigError, RagBenchError, UsageError
from ragbench.generation.gateway import GeneratorGateway
from ragbench.generation.models import GenerationOutput, GenParams
from ragbench.instructions.lab import InstructionStore
from ragbench.instructions.models import PromptAssembly
from ragbench.retrieval.client import Retriever
from ragbench.retrieval.models import Passage

from .models import (
    AlgorithmConfig,
    DecisionStep,
    GenerationStep,
    GenerationTrack,
    InferenceMode,
    RetrievalStep,
)


class InferenceError(RagBenchError):
    """Backend failure during inference; carries the partial track"""

    def __init__(self, message: str, track: GenerationTrack):
        super().__init__(message)
        self.track = track


class NaiveRag:
    """
    Retrieve n_docs passages once, then generate with them in the prompt.

    Usage:
        rag = NaiveRag(config, gateway, retriever, instructions)
        answer, track = await rag.inference("Who wrote Hamlet?", mode="interact")
    """

    name = "naive"
    default_instruction = "naive_rag"
    requires_retriever = True

    def __init__(
        self,
        config: AlgorithmConfig,
        gateway: GeneratorGateway,
        retriever: Optional[Retriever],
        instructions: InstructionStore,
    ):
        self.config = config
        self.gateway = gateway
        self.retriever = retriever
        self.instructions = instructions
        if self.requires_retriever and retriever is None:
            raise ConfigError(f"{self.name} needs a retriever", fields=["retriever: set endpoint or index_path"])
        self.init()

    def init(self) -> None:
        """Hook for algorithm-specific setup and config checks"""
        return None

    @property
    def algorithm_instruction(self) -> str:
        return self.config.algorithm_instruction or self.default_instruction

    def instruction_names(self) -> List[str]:
        """Algorithm-pool templates this algorithm renders"""
        return [self.algorithm_instruction]

    def roles(self) -> List[str]:
        """Generator roles this algorithm calls"""
        return [self.config.generator_role]

    # =========================================================================
    # Shared Helpers
    # =========================================================================

    def find_instruction(self, bindings: Dict[str, Any], algorithm: Optional[str] = None) -> str:
        """Render system + task + algorithm templates with the given bindings"""
        assembly = PromptAssembly(
            system=self.config.system_instruction,
            task=self.config.task_instruction,
            algorithm=algorithm or self.algorithm_instruction,
            bindings=bindings,
        )
        return self.instructions.render(assembly)

    async def retrieve(self, track: GenerationTrack, query: str, k: Optional[int] = None) -> List[Passage]:
        k = k or self.config.n_docs
        result = await self.retriever.search(query, k)
        track.add(RetrievalStep(query=query, k=k, passages=result.passages, cache_hit=result.cache_hit))
        return result.passages

    async def generate(
        self,
        track: GenerationTrack,
        prompt: str,
        params: Optional[GenParams] = None,
        role: Optional[str] = None,
    ) -> GenerationOutput:
        role = role or self.config.generator_role
        output = await self.gateway.complete(prompt, params or self.config.generation, role=role)
        track.add(GenerationStep(prompt=prompt, output=output, role=role))
        return output

    @staticmethod
    def decide(track: GenerationTrack, kind: str, value: Any = None, **inputs: Any) -> DecisionStep:
        step = DecisionStep(kind=kind, inputs=inputs, value=value)
        track.add(step)
        return step

    # =========================================================================
    # Inference
    # =========================================================================

    async def infer(self, query: str, bindings: Dict[str, Any], track: GenerationTrack) -> str:
        passages = await self.retrieve(track, query)
        if not passages:
            self.decide(track, "empty_retrieval", value=True, query=query)
        output = await self.generate(track, self.find_instruction({**bindings, "passages": passages}))
        return output.text.strip()

    async def run(self, query: str, bindings: Optional[Dict[str, Any]] = None) -> Tuple[str, GenerationTrack]:
        """
        Answer one query.

        Args:
            query: Question text
            bindings: Extra template bindings (e.g. choices); query is always bound

        Raises:
            InferenceError: Generator or retriever failure, with the partial track
        """
        track = GenerationTrack()
        bindings = {**(bindings or {}), "query": query}
        try:
            answer = await self.infer(query, bindings, track)
        except (ConfigError, UsageError):
            raise
        except RagBenchError as e:
            logger.warning(f"{self.name} inference failed after {len(track.steps)} steps: {e}")
            raise InferenceError(f"{self.name}: {e}", track) from e
        track.answer = answer
        return answer, track

    async def inference(
        self,
        query: Optional[str] = None,
        mode: Union[InferenceMode, str] = InferenceMode.INTERACT,
        run_config: Any = None,
    ):
        """
        Interact or evaluation entry point.

        interact returns (answer, track); evaluation runs the configured
        benchmark through the evaluation harness and returns its EvalReport.

        Raises:
            UsageError: Unknown mode, missing query or missing run config
        """
        try:
            mode = InferenceMode(mode)
        except ValueError:
            raise UsageError(f"unknown inference mode {mode!r}; expected interact or evaluation") from None

        if mode == InferenceMode.INTERACT:
            if not query or not query.strip():
                raise UsageError("interact mode needs a query")
            return await self.run(query.strip())

        if run_config is None:
            raise UsageError("evaluation mode needs a run config with a dataset")
        from ragbench.evaluation.harness import evaluate_run

        return await evaluate_run(run_config, algorithm=self)
