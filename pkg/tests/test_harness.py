"""Evaluation harness: reports, alignment fingerprints, resume and batches."""

import json
import shutil
from pathlib import Path

import pandas as pd
import pytest
from conftest import FailingGenerator, FunctionGenerator

from ragbench.config import DatasetSettings, RunConfig, load_batch
from ragbench.errors import ConfigError
from ragbench.evaluation import (
    AlignmentError,
    DatasetError,
    apply_preset,
    evaluate_batch,
    evaluate_run,
    get_preset,
    load_journal,
)
from ragbench.evaluation.harness import AGGREGATES_TSV, ITEMS_FILE, REPORT_FILE, prepare_run
from ragbench.generation import GenerationOutput, GeneratorGateway, GeneratorTransportError
from ragbench.runtime import Runtime


ITEMS = [
    {"id": "q1", "question": "What is the capital of France?", "answers": ["Paris"]},
    {"id": "q2", "question": "Who wrote Hamlet?", "answers": ["William Shakespeare", "Shakespeare"]},
    {"id": "q3", "question": "Who was Henry Feilden?", "answers": ["politician"]},
]


def answer_for(prompt, params):
    if "capital of France" in prompt:
        return GenerationOutput.from_text(" Paris")
    if "Hamlet" in prompt:
        return GenerationOutput.from_text(" Shakespeare")
    return GenerationOutput.from_text(" I don't know")


@pytest.fixture
def dataset_path(tmp_path):
    path = tmp_path / "popqa.jsonl"
    path.write_text("".join(json.dumps(item) + "\n" for item in ITEMS), encoding="utf-8")
    return path


@pytest.fixture
def run_config(dataset_path, tmp_path):
    return RunConfig(
        algorithm="naive",
        benchmark="popqa",
        dataset=DatasetSettings(path=str(dataset_path)),
        output_dir=str(tmp_path / "runs"),
        sample_size=3,
    )


@pytest.fixture
def runtime_for(instructions, local_retriever):
    def _factory(backend=None):
        gateway = GeneratorGateway.single(backend or FunctionGenerator(answer_for))
        return Runtime(instructions, gateway, local_retriever)

    return _factory


def _run_dir(config, report):
    return Path(config.output_dir) / report.run_id


def read_run(out_dir):
    return {name: (out_dir / name).read_bytes() for name in (ITEMS_FILE, REPORT_FILE, AGGREGATES_TSV)}


# =============================================================================
# Single Runs
# =============================================================================

class TestEvaluateRun:
    async def test_report_and_files(self, run_config, runtime_for):
        report = await evaluate_run(run_config, runtime=runtime_for())

        assert (report.items, report.scored, report.errored) == (3, 3, 0)
        assert report.aggregates == pytest.approx({"accuracy": 2 / 3, "em": 2 / 3, "f1": 2 / 3})
        assert report.run_id.startswith("naive-popqa-")

        run_dir = _run_dir(run_config, report)
        items = [json.loads(line) for line in (run_dir / ITEMS_FILE).read_text(encoding="utf-8").splitlines()]
        assert [r["item_id"] for r in items] == ["q1", "q2", "q3"]
        assert items[0]["answer"] == "Paris"
        assert items[0]["track"]["retrievals"] == 1

        summary = json.loads((run_dir / REPORT_FILE).read_text(encoding="utf-8"))
        assert "records" not in summary
        assert summary["fingerprint"]["digest"] == report.fingerprint.digest

        table = pd.read_csv(run_dir / AGGREGATES_TSV, sep="\t")
        assert list(table.columns) == ["metric", "mean", "scored", "errored"]
        for metric in ("accuracy", "em", "f1"):
            mean = sum(r["scores"][metric] for r in items) / len(items)
            assert table.set_index("metric").loc[metric, "mean"] == pytest.approx(mean, abs=1e-6)

    async def test_preset_fills_unset_fields_only(self, run_config):
        preset = get_preset("popqa")
        rag = apply_preset(run_config, preset)
        assert (rag.n_docs, rag.task_instruction, rag.generation.max_new_tokens) == (10, "popqa", 300)

        explicit = run_config.model_copy(update={"rag": run_config.rag.model_copy(update={"n_docs": 2})})
        assert apply_preset(explicit, preset).n_docs == 2
        assert apply_preset(run_config.model_copy(update={"seed": 7}), preset).generation.seed == 7

    async def test_missing_dataset(self, runtime_for, tmp_path):
        with pytest.raises(ConfigError) as exc:
            await evaluate_run(RunConfig(output_dir=str(tmp_path)), runtime=runtime_for())
        assert exc.value.fields == ["dataset.path: required"]

    async def test_missing_short_answers_rejected_before_inference(self, runtime_for, tmp_path):
        def asqa_record(sample_id, short_answers):
            return {
                "sample_id": sample_id,
                "ambiguous_question": "Who starred in the film?",
                "annotations": [{"long_answer": "Tom Hanks starred."}],
                "qa_pairs": [{"short_answers": s} for s in short_answers],
            }

        path = tmp_path / "asqa.jsonl"
        records = [asqa_record("s1", [["Tom Hanks"]]), asqa_record("s2", []), asqa_record("s3", [["Meg Ryan"]])]
        path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
        config = RunConfig(
            benchmark="asqa",
            dataset=DatasetSettings(path=str(path)),
            output_dir=str(tmp_path / "runs"),
            sample_size=3,
        )
        backend = FunctionGenerator(answer_for)

        with pytest.raises(DatasetError) as exc:
            await evaluate_run(config, runtime=runtime_for(backend))
        assert "s2" in str(exc.value)
        assert exc.value.exit_code == 2
        assert backend.prompts == []
        assert not (tmp_path / "runs").exists()

    async def test_reruns_are_byte_identical(self, run_config, runtime_for):
        report = await evaluate_run(run_config, runtime=runtime_for())
        run_dir = _run_dir(run_config, report)
        first = read_run(run_dir)
        shutil.rmtree(run_dir)
        await evaluate_run(run_config, runtime=runtime_for())
        assert read_run(run_dir) == first

    async def test_errored_items_are_kept_out_of_means(self, run_config, runtime_for):
        def flaky(prompt, params):
            if "Hamlet" in prompt:
                raise GeneratorTransportError("connection reset")
            return answer_for(prompt, params)

        report = await evaluate_run(run_config, runtime=runtime_for(FunctionGenerator(flaky)))
        assert (report.scored, report.errored) == (2, 1)
        assert report.aggregates["accuracy"] == pytest.approx(0.5)
        errored = [r for r in report.records if r.errored]
        assert errored[0].item_id == "q2"
        assert errored[0].track.retrievals == 1

    async def test_all_items_failing(self, run_config, runtime_for):
        report = await evaluate_run(
            run_config, runtime=runtime_for(FailingGenerator(GeneratorTransportError("down")))
        )
        assert report.errored == 3
        assert report.aggregates == {}


# =============================================================================
# Resume
# =============================================================================

class TestResume:
    async def test_interrupted_run_resumes_to_identical_output(self, run_config, runtime_for):
        report = await evaluate_run(run_config, runtime=runtime_for())
        run_dir = _run_dir(run_config, report)
        uninterrupted = read_run(run_dir)

        lines = (run_dir / ITEMS_FILE).read_text(encoding="utf-8").splitlines()
        (run_dir / ITEMS_FILE).write_text(lines[0] + "\n" + lines[1][:20], encoding="utf-8")

        backend = FunctionGenerator(answer_for)
        await evaluate_run(run_config, runtime=runtime_for(backend))
        assert len(backend.prompts) == 2
        assert read_run(run_dir) == uninterrupted

    async def test_errored_items_are_retried(self, run_config, runtime_for):
        def flaky(prompt, params):
            if "Hamlet" in prompt:
                raise GeneratorTransportError("connection reset")
            return answer_for(prompt, params)

        report = await evaluate_run(run_config, runtime=runtime_for(FunctionGenerator(flaky)))
        run_dir = _run_dir(run_config, report)
        assert set(load_journal(run_dir / ITEMS_FILE)) == {"q1", "q3"}

        backend = FunctionGenerator(answer_for)
        report = await evaluate_run(run_config, runtime=runtime_for(backend))
        assert len(backend.prompts) == 1
        assert report.errored == 0


# =============================================================================
# Alignment
# =============================================================================

class TestAlignment:
    async def test_fingerprint_is_stable(self, run_config, runtime_for):
        first = await prepare_run("a", run_config, runtime_for())
        second = await prepare_run("b", run_config, runtime_for())
        assert first.fingerprint == second.fingerprint

    @pytest.mark.parametrize(
        "update, component",
        [
            ({"sample_size": 2}, "benchmark"),
            ({"algorithm": "iter_retgen"}, "algorithm"),
        ],
    )
    async def test_component_changes(self, run_config, runtime_for, update, component):
        base = await prepare_run("a", run_config, runtime_for())
        changed = await prepare_run("b", run_config.model_copy(update=update), runtime_for())
        assert base.fingerprint.differing(changed.fingerprint) == [component]

    async def test_n_docs_changes_retriever_component(self, run_config, runtime_for):
        rag = run_config.rag.model_copy(update={"n_docs": 3})
        base = await prepare_run("a", run_config, runtime_for())
        changed = await prepare_run("b", run_config.model_copy(update={"rag": rag}), runtime_for())
        assert base.fingerprint.differing(changed.fingerprint) == ["retriever"]

    async def test_misaligned_batch_runs_nothing(self, run_config, runtime_for, tmp_path):
        rag = run_config.rag.model_copy(update={"task_instruction": "triviaqa"})
        members = [
            ("naive", run_config),
            ("iter", run_config.model_copy(update={"algorithm": "iter_retgen", "rag": rag})),
        ]
        with pytest.raises(AlignmentError) as exc:
            await evaluate_batch(members, runtime=runtime_for())
        assert any("instructions" in field for field in exc.value.fields)
        assert not (tmp_path / "runs").exists()

    async def test_aligned_batch_writes_comparison(self, run_config, runtime_for):
        members = [
            ("naive", run_config),
            ("iter", run_config.model_copy(update={"algorithm": "iter_retgen"})),
            ("direct", run_config.model_copy(update={"algorithm": "direct"})),
        ]
        reports = await evaluate_batch(members, runtime=runtime_for())
        assert [r.algorithm for r in reports] == ["naive", "iter_retgen", "direct"]
        shared = {name: digest for name, digest in reports[0].fingerprint.components.items() if name != "algorithm"}
        for report in reports[1:]:
            assert {n: d for n, d in report.fingerprint.components.items() if n != "algorithm"} == shared

        table = pd.read_csv(f"{run_config.output_dir}/comparison.tsv", sep="\t", index_col="algorithm")
        assert list(table.index) == ["naive", "iter", "direct"]
        assert list(table.columns) == ["accuracy", "em", "f1", "errored"]


# =============================================================================
# End to end
# =============================================================================

class TestSevenAlgorithmBatch:
    async def test_batch_from_files(self, tmp_path, dataset_path, toy_index):
        index_path = toy_index.save(tmp_path / "toy.idx")
        script = tmp_path / "script.yaml"
        script.write_text("default:\n  text: ' Paris [Utility:5]'\n", encoding="utf-8")
        batch = tmp_path / "batch.yaml"
        batch.write_text(
            "base:\n"
            "  benchmark: popqa\n"
            f"  dataset: {{path: '{dataset_path}'}}\n"
            f"  output_dir: '{tmp_path / 'out'}'\n"
            f"  retriever: {{index_path: '{index_path}'}}\n"
            "  generators:\n"
            f"    endpoints: {{default: {{kind: scripted, script_path: '{script}'}}}}\n"
            "algorithms: [direct, naive, rrr, iter_retgen, self_ask, active_rag, self_rag]\n",
            encoding="utf-8",
        )

        reports = await evaluate_batch(load_batch(batch))
        assert len(reports) == 7
        assert len({r.fingerprint.digest for r in reports}) == 7
        for report in reports:
            assert report.errored == 0
            assert report.aggregates["accuracy"] == pytest.approx(1 / 3)
        comparison = (tmp_path / "out" / "comparison.txt").read_text(encoding="utf-8")
        assert "self_rag" in comparison and "active_rag" in comparison
