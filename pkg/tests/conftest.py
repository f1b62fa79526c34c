"""Shared fixtures: toy corpora, scripted generators, in-process retrievers."""

from typing import Callable, List, Optional

import pytest

from ragbench.algorithms import AlgorithmConfig, create_algorithm
from ragbench.generation import GenerationOutput, GeneratorGateway, GenParams, ScriptedGenerator
from ragbench.instructions import load_pools
from ragbench.retrieval import Corpus, LocalRetriever, Passage, RetrievalService, RetrieverInfo, SearchResult, build_index

TOY_PASSAGES = [
    ("Henry Feilden", "Henry Feilden was an English Conservative Party politician."),
    ("Paris", "Paris is the capital and largest city of France."),
    ("Hamlet", "Hamlet is a tragedy written by William Shakespeare."),
    ("William Shakespeare", "William Shakespeare was an English playwright and poet."),
    ("France", "France is a country in Western Europe with Paris as its capital."),
]


class FunctionGenerator:
    """Generator whose output is computed from the prompt by a callable."""

    def __init__(self, fn: Callable[[str, GenParams], GenerationOutput]) -> None:
        self.fn = fn
        self.prompts: List[str] = []

    async def complete(self, prompt: str, params: GenParams) -> GenerationOutput:
        self.prompts.append(prompt)
        return self.fn(prompt, params)


class FailingGenerator:
    """Raises the given error on every call."""

    def __init__(self, error: Exception) -> None:
        self.error = error

    async def complete(self, prompt: str, params: GenParams) -> GenerationOutput:
        raise self.error


class StaticRetriever:
    """Returns the same passages for every query and records the queries."""

    def __init__(self, passages: List[Passage]) -> None:
        self.passages = passages
        self.queries: List[str] = []

    async def search(self, query: str, k: int) -> SearchResult:
        self.queries.append(query)
        return SearchResult(passages=self.passages[:k])

    async def describe(self) -> RetrieverInfo:
        return RetrieverInfo(corpus_fingerprint="static", config_digest="static", passages=len(self.passages))


@pytest.fixture
def toy_corpus() -> Corpus:
    passages = [Passage(id=i, title=title, text=text) for i, (title, text) in enumerate(TOY_PASSAGES)]
    return Corpus.from_passages(passages, documents=len(passages))


@pytest.fixture
def toy_index(toy_corpus):
    return build_index(toy_corpus)


@pytest.fixture
def retrieval_service(toy_index):
    service = RetrievalService(toy_index)
    yield service
    service.close()


@pytest.fixture
def local_retriever(retrieval_service) -> LocalRetriever:
    return LocalRetriever(retrieval_service)


@pytest.fixture(scope="session")
def instructions():
    return load_pools()


@pytest.fixture
def scripted():
    """Factory fixture: ScriptedGenerator with an optional ordinal sequence."""

    def _factory(responses: Optional[list] = None) -> ScriptedGenerator:
        gen = ScriptedGenerator()
        if responses:
            gen.register_sequence(responses)
        return gen

    return _factory


@pytest.fixture
def make_algorithm(instructions, local_retriever):
    """Factory fixture: algorithm by name over one backend and the toy retriever."""

    def _factory(name: str, backend, config: Optional[AlgorithmConfig] = None, retriever=local_retriever):
        gateway = GeneratorGateway.single(backend)
        return create_algorithm(name, config or AlgorithmConfig(n_docs=2), gateway, retriever, instructions)

    return _factory
