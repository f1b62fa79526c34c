"""Algorithm control flow: retrieval counts, tracks, Self-Ask, RRR, ITER-RETGEN."""

import pytest
from conftest import FailingGenerator, FunctionGenerator, StaticRetriever

from ragbench.algorithms import (
    ALGORITHMS,
    AlgorithmConfig,
    DirectGeneration,
    InferenceError,
    IterRetGenConfig,
    SelfAskConfig,
    SelfRagConfig,
    SelfRagMode,
    create_algorithm,
    get_algorithm_class,
)
from ragbench.errors import ConfigError, UsageError
from ragbench.generation import GenerationOutput, GeneratorGateway, GeneratorTransportError, scripted_output
from ragbench.retrieval import Passage


def text(value: str):
    return lambda prompt, params: GenerationOutput.from_text(value)


def with_logprobs(value: str):
    return lambda prompt, params: scripted_output(value)


def rrr_backend(prompt, params):
    if prompt.rstrip().endswith("Query:"):
        return GenerationOutput.from_text(" capital of France\nignored second line")
    return GenerationOutput.from_text(" Paris")


def self_ask_once(prompt, params):
    if prompt.endswith("Intermediate answer:"):
        return GenerationOutput.from_text(" an English politician")
    if "Intermediate answer: an English politician" in prompt:
        return GenerationOutput.from_text("So the final answer is: politician")
    return GenerationOutput.from_text("Follow up: Who was Henry Feilden?\n")


RETRIEVAL_COUNTS = [
    ("direct", text(" Paris"), None, 0),
    ("naive", text(" Paris"), None, 1),
    ("rrr", rrr_backend, None, 1),
    ("iter_retgen", text(" Paris"), None, 3),
    ("self_ask", self_ask_once, None, 1),
    ("self_rag", with_logprobs(" Paris"), AlgorithmConfig(n_docs=2, self_rag=SelfRagConfig(mode=SelfRagMode.NO)), 0),
]


class TestRegistry:
    def test_names(self):
        assert set(ALGORITHMS) == {"direct", "naive", "rrr", "iter_retgen", "self_ask", "active_rag", "self_rag"}

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            get_algorithm_class("flare")

    def test_retriever_required(self, instructions):
        gateway = GeneratorGateway.single(FunctionGenerator(text("x")))
        with pytest.raises(ConfigError):
            create_algorithm("naive", AlgorithmConfig(), gateway, None, instructions)
        assert isinstance(create_algorithm("direct", AlgorithmConfig(), gateway, None, instructions), DirectGeneration)


class TestRetrievalCounts:
    @pytest.mark.parametrize("name, fn, config, expected", RETRIEVAL_COUNTS, ids=[r[0] for r in RETRIEVAL_COUNTS])
    async def test_matrix(self, make_algorithm, name, fn, config, expected):
        algorithm = make_algorithm(name, FunctionGenerator(fn), config)
        answer, track = await algorithm.run("Who was Henry Feilden?")
        assert len(track.retrievals) == expected
        assert track.answer == answer
        assert answer

    @pytest.mark.parametrize("iterations", [1, 2, 3, 5])
    async def test_iter_retgen_counts(self, make_algorithm, iterations):
        config = AlgorithmConfig(n_docs=2, iter_retgen=IterRetGenConfig(max_iteration=iterations))
        _, track = await make_algorithm("iter_retgen", FunctionGenerator(text(" Paris")), config).run("q paris")
        assert len(track.retrievals) == len(track.generations) == iterations


class TestNaive:
    async def test_prompt_contains_passages_and_question(self, make_algorithm):
        backend = FunctionGenerator(text(" Paris "))
        answer, track = await make_algorithm("naive", backend).run("What is the capital of France?")
        assert answer == "Paris"
        assert track.shape() == ["retrieval", "generation"]
        prompt = backend.prompts[0]
        assert "Paris is the capital and largest city of France." in prompt
        assert "Question: What is the capital of France?" in prompt
        assert track.retrievals[0].k == 2

    async def test_empty_retrieval_recorded(self, make_algorithm):
        answer, track = await make_algorithm("naive", FunctionGenerator(text("unknown"))).run("zzz qqq")
        assert answer == "unknown"
        assert track.retrievals[0].passages == []
        assert track.decisions("empty_retrieval")

    async def test_backend_failure_carries_partial_track(self, make_algorithm):
        algorithm = make_algorithm("naive", FailingGenerator(GeneratorTransportError("down")))
        with pytest.raises(InferenceError) as exc:
            await algorithm.run("capital of France")
        assert exc.value.track.shape() == ["retrieval"]

    async def test_inference_modes(self, make_algorithm):
        algorithm = make_algorithm("direct", FunctionGenerator(text("Paris")))
        answer, track = await algorithm.inference("capital?", mode="interact")
        assert answer == "Paris"
        with pytest.raises(UsageError):
            await algorithm.inference("capital?", mode="batch")
        with pytest.raises(UsageError):
            await algorithm.inference("   ", mode="interact")
        with pytest.raises(UsageError):
            await algorithm.inference(mode="evaluation")

    async def test_same_script_same_track(self, make_algorithm):
        def once():
            retriever = StaticRetriever([Passage(id=1, title="Paris", text="Paris is the capital of France.")])
            return make_algorithm("iter_retgen", FunctionGenerator(text(" Paris")), retriever=retriever)

        first = await once().run("capital of France")
        second = await once().run("capital of France")
        assert first[1].model_dump_json() == second[1].model_dump_json()


class TestRrr:
    async def test_rewrite_drives_retrieval(self, make_algorithm):
        retriever = StaticRetriever([Passage(id=0, title="Paris", text="Paris is the capital.")])
        answer, track = await make_algorithm("rrr", FunctionGenerator(rrr_backend), retriever=retriever).run(
            "Which city is the French capital?"
        )
        assert answer == "Paris"
        assert track.shape() == ["generation", "decision", "retrieval", "generation"]
        assert retriever.queries == ["capital of France"]
        assert track.decisions("rewrite")[0].value == "capital of France"

    async def test_empty_rewrite_falls_back(self, make_algorithm):
        def backend(prompt, params):
            return GenerationOutput.from_text("   " if prompt.rstrip().endswith("Query:") else "Paris")

        retriever = StaticRetriever([Passage(id=0, text="x")])
        _, track = await make_algorithm("rrr", FunctionGenerator(backend), retriever=retriever).run("original q")
        assert retriever.queries == ["original q"]
        assert track.decisions("rewrite_fallback")


class TestIterRetGen:
    async def test_queries_feed_back_generation(self, make_algorithm):
        outputs = iter([" first", " second", " third"])
        retriever = StaticRetriever([Passage(id=0, text="x")])
        backend = FunctionGenerator(lambda p, params: GenerationOutput.from_text(next(outputs)))
        answer, _ = await make_algorithm("iter_retgen", backend, retriever=retriever).run("q")
        assert answer == "third"
        assert retriever.queries == ["q", "q first", "q second"]


class TestSelfAsk:
    async def test_follow_up_then_final(self, make_algorithm):
        backend = FunctionGenerator(self_ask_once)
        answer, track = await make_algorithm("self_ask", backend).run("What was Henry Feilden's occupation?")
        assert answer == "politician"
        assert track.shape() == ["generation", "retrieval", "generation", "generation"]
        assert track.retrievals[0].query == "Who was Henry Feilden?"
        assert "Follow up: Who was Henry Feilden?\nIntermediate answer: an English politician\n" in backend.prompts[2]

    async def test_budget_exhaustion(self, make_algorithm):
        calls = {"n": 0}

        def backend(prompt, params):
            if prompt.endswith("Intermediate answer:"):
                return GenerationOutput.from_text(" something")
            calls["n"] += 1
            return GenerationOutput.from_text(f"Follow up: question {calls['n']}?")

        answer, track = await make_algorithm("self_ask", FunctionGenerator(backend)).run("hard question")
        assert len(track.retrievals) == 5
        assert track.decisions("budget_exhausted")[0].value == 5
        assert answer == "Follow up: question 5?"

    async def test_no_marker_does_not_retrieve(self, make_algorithm):
        config = AlgorithmConfig(n_docs=2, self_ask=SelfAskConfig(max_iteration=2))
        answer, track = await make_algorithm("self_ask", FunctionGenerator(text("I am not sure")), config).run("q")
        assert track.retrievals == []
        assert len(track.decisions("no_marker")) == 2
        assert answer == "I am not sure"

    async def test_final_wins_over_follow_up(self, make_algorithm):
        backend = FunctionGenerator(text("Follow up: x?\nSo the final answer is: Paris"))
        answer, track = await make_algorithm("self_ask", backend).run("q")
        assert answer == "Paris"
        assert track.decisions("both_markers")
        assert track.retrievals == []

    async def test_intermediate_marker_is_a_stop_sequence(self, make_algorithm):
        seen = []

        def backend(prompt, params):
            seen.append(params.stop)
            return GenerationOutput.from_text("So the final answer is: x")

        await make_algorithm("self_ask", FunctionGenerator(backend)).run("q")
        assert "Intermediate answer:" in seen[0]
