"""Run configs, overrides, batch files and runtime construction."""

import pytest

from ragbench.config import RetrieverSettings, RunConfig, load_batch, load_config, parse_override
from ragbench.errors import ConfigError
from ragbench.retrieval import LocalRetriever
from ragbench.runtime import build_retriever, build_runtime


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("RAGBENCH_OUTPUT_DIR", "RAGBENCH_LOG_LEVEL", "RAGBENCH_INDEX_PATH"):
        monkeypatch.delenv(name, raising=False)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfig:
    def test_defaults(self):
        config = load_config()
        assert config.algorithm == "naive"
        assert config.rag.n_docs == 10
        assert config.generators.resolve("default") == "default"

    def test_file_and_overrides(self, tmp_path):
        path = write(tmp_path, "run.yaml", "algorithm: naive\nrag:\n  n_docs: 5\n")
        config = load_config(
            path,
            ["algorithm=self_rag", "rag.self_rag.mode=always", "rag.generation.max_new_tokens=64", "dataset.path=d.jsonl"],
        )
        assert config.algorithm == "self_rag"
        assert config.rag.n_docs == 5
        assert config.rag.self_rag.mode == "always"
        assert config.rag.generation.max_new_tokens == 64
        assert config.dataset.path == "d.jsonl"

    def test_field_errors_are_reported(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            load_config(None, ["rag.n_docs=0", "bogus=1"])
        assert any(field.startswith("rag.n_docs") for field in exc.value.fields)
        assert any(field.startswith("bogus") for field in exc.value.fields)
        assert exc.value.exit_code == 2

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            load_config(None, ["algorithm=flare"])

    def test_bad_override_and_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_override("no-equals-sign")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")

    def test_override_values_are_yaml(self):
        assert parse_override("a.b=[1, 2]") == ("a.b", [1, 2])
        assert parse_override("x=true") == ("x", True)
        assert parse_override("x=") == ("x", "")

    def test_output_dir_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("RAGBENCH_OUTPUT_DIR", str(tmp_path / "env-runs"))
        assert load_config().output_dir == str(tmp_path / "env-runs")


class TestLoadBatch:
    def test_members_share_base(self, tmp_path):
        write(tmp_path, "base.yaml", "benchmark: popqa\nseed: 3\n")
        path = write(
            tmp_path,
            "batch.yaml",
            "base: base.yaml\n"
            "algorithms:\n"
            "  - naive\n"
            "  - {name: iter5, algorithm: iter_retgen, set: ['rag.iter_retgen.max_iteration=5']}\n",
        )
        members = load_batch(path, ["sample_size=10"])
        assert [name for name, _ in members] == ["naive", "iter5"]
        naive, iter5 = (config for _, config in members)
        assert (naive.algorithm, iter5.algorithm) == ("naive", "iter_retgen")
        assert iter5.rag.iter_retgen.max_iteration == 5
        assert naive.rag.iter_retgen.max_iteration == 3
        assert naive.seed == iter5.seed == 3
        assert naive.sample_size == iter5.sample_size == 10

    def test_duplicate_names(self, tmp_path):
        path = write(tmp_path, "batch.yaml", "base: {}\nalgorithms: [naive, naive]\n")
        with pytest.raises(ConfigError):
            load_batch(path)

    def test_empty_batch(self, tmp_path):
        with pytest.raises(ConfigError):
            load_batch(write(tmp_path, "batch.yaml", "base: {}\nalgorithms: []\n"))


class TestRuntime:
    def test_endpoint_and_index_are_exclusive(self):
        with pytest.raises(ConfigError):
            build_retriever(RetrieverSettings(endpoint="http://r", index_path="i.idx"))

    def test_no_retriever(self):
        assert build_retriever(RetrieverSettings()) is None

    async def test_local_index(self, toy_index, tmp_path):
        path = toy_index.save(tmp_path / "toy.idx")
        runtime = build_runtime(RunConfig(retriever=RetrieverSettings(index_path=str(path))))
        try:
            assert isinstance(runtime.retriever, LocalRetriever)
            result = await runtime.retriever.search("who wrote hamlet", 1)
            assert result.passages[0].title == "Hamlet"
        finally:
            await runtime.close()
