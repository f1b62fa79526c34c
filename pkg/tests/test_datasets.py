"""Dataset adapters, presets and training-data prep."""

import json

import pytest

from ragbench.errors import ConfigError, UsageError
from ragbench.evaluation import (
    DatasetError,
    KeyMap,
    adapt_record,
    default_special_tokens,
    get_preset,
    load_dataset,
    load_presets,
    load_token_list,
    prep_file,
    sample_sequential,
    strip_special_tokens,
)
from ragbench.evaluation.datasets import resolve_path


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


# =============================================================================
# Datasets
# =============================================================================

class TestDatasets:
    def test_default_keymap_and_sequential_ids(self, tmp_path):
        path = write_jsonl(
            tmp_path / "d.jsonl",
            [{"question": "Capital of France?", "answers": ["Paris"], "year": 2020}, {"question": "q2", "answers": "x"}],
        )
        items = load_dataset(path)
        assert [i.id for i in items] == ["0", "1"]
        assert items[0].answers == ["Paris"]
        assert items[0].metadata == {"year": 2020}
        assert items[1].answers == ["x"]

    def test_nested_paths(self):
        record = {
            "ambiguous_question": "Who starred?",
            "annotations": [{"long_answer": "Tom Hanks starred."}, {"long_answer": "Meg Ryan too."}],
            "qa_pairs": [{"short_answers": ["Tom Hanks"]}, {"short_answers": ["Meg Ryan", "M. Ryan"]}],
            "sample_id": "s1",
        }
        keymap = get_preset("asqa").keymap
        item = adapt_record(record, keymap, index=0)
        assert item.id == "s1"
        assert item.answers == ["Tom Hanks starred.", "Meg Ryan too."]
        assert item.short_answers == [["Tom Hanks"], ["Meg Ryan", "M. Ryan"]]

    def test_arc_choices(self):
        record = {
            "id": "arc-1",
            "question": "Which barks?",
            "choices": {"label": ["A", "B"], "text": ["cat", "dog"]},
            "answerKey": "B",
        }
        item = adapt_record(record, get_preset("arc").keymap, index=0)
        assert [(c.label, c.text) for c in item.choices] == [("A", "cat"), ("B", "dog")]
        assert item.answers == ["B"]
        assert item.bindings() == {"choices": item.choices}

    def test_answer_index_maps_to_label(self):
        keymap = KeyMap(answers_key="answer", choices_key="choices")
        item = adapt_record({"question": "q", "choices": ["x", "y", "z"], "answer": 2}, keymap, index=0)
        assert item.answers == ["C"]

    def test_boolean_labels(self):
        keymap = KeyMap(question_key="claim", answers_key="label", bool_labels=("yes", "no"))
        item = adapt_record({"claim": "c", "label": False}, keymap, index=0)
        assert item.answers == ["no"]

    def test_json_encoded_answer_list(self):
        item = adapt_record({"question": "q", "answers": '["a", "b"]'}, KeyMap(), index=0)
        assert item.answers == ["a", "b"]

    def test_missing_key_names_line(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [{"question": "q", "answers": ["a"]}, {"question": "q"}])
        with pytest.raises(DatasetError) as exc:
            load_dataset(path)
        assert exc.value.line == 2
        assert exc.value.exit_code == 2
        assert "answers" in str(exc.value)

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"question": "q", "answers": ["a"]}\n{not json\n', encoding="utf-8")
        with pytest.raises(DatasetError) as exc:
            load_dataset(path)
        assert exc.value.line == 2

    def test_duplicate_ids_rejected(self, tmp_path):
        path = write_jsonl(
            tmp_path / "d.jsonl",
            [{"id": 1, "question": "a", "answers": ["x"]}, {"id": 1, "question": "b", "answers": ["y"]}],
        )
        with pytest.raises(DatasetError):
            load_dataset(path, KeyMap(id_key="id"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "nope.jsonl")

    def test_resolve_path(self):
        record = {"a": [{"b": 1}, {"b": 2}], "c": {"d": "x"}}
        assert resolve_path(record, "a.*.b") == [1, 2]
        assert resolve_path(record, "c.d") == "x"
        assert resolve_path(record, "a.-1.b") == 2
        with pytest.raises(KeyError):
            resolve_path(record, "c.e")

    def test_sample_sequential(self, tmp_path):
        path = write_jsonl(tmp_path / "d.jsonl", [{"question": f"q{i}", "answers": ["a"]} for i in range(5)])
        items = load_dataset(path)
        assert [i.question for i in sample_sequential(items, 3)] == ["q0", "q1", "q2"]
        assert len(sample_sequential(items, 50)) == 5
        with pytest.raises(UsageError):
            sample_sequential(items, 0)


# =============================================================================
# Presets
# =============================================================================

class TestPresets:
    def test_packaged_presets(self):
        presets = load_presets()
        assert {"popqa", "triviaqa", "hotpotqa", "2wikimultihopqa", "arc", "mmlu", "pubhealth", "asqa"} <= set(presets)
        assert presets["popqa"].metrics == ["accuracy", "em", "f1"]
        assert presets["asqa"].metrics == ["str_em", "str_hit", "rouge_l"]
        assert presets["arc"].task_instruction == "arc"

    def test_unknown_benchmark(self):
        with pytest.raises(ConfigError) as exc:
            get_preset("nope")
        assert exc.value.fields

    def test_custom_file(self, tmp_path):
        path = tmp_path / "presets.yaml"
        path.write_text("mine:\n  metrics: [em]\n  n_docs: 3\n  task_instruction: popqa\n", encoding="utf-8")
        preset = get_preset("mine", path)
        assert (preset.n_docs, preset.metrics, preset.task_instruction) == (3, ["em"], "popqa")

    def test_unknown_metric_rejected(self, tmp_path):
        path = tmp_path / "presets.yaml"
        path.write_text("mine:\n  metrics: [bleu]\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_presets(path)


# =============================================================================
# Prep
# =============================================================================

class TestPrep:
    RECORD = {
        "instruction": "Who wrote Hamlet?",
        "output": "[Retrieval]<paragraph>Hamlet</paragraph>[Relevant] Shakespeare wrote it.[Fully supported][Utility:5]",
    }

    def test_strip_default_tokens(self):
        (stripped,), removed = strip_special_tokens([self.RECORD])
        assert stripped["output"] == "Hamlet Shakespeare wrote it."
        assert stripped["instruction"] == self.RECORD["instruction"]
        assert removed == 6

    def test_prep_file_is_idempotent(self, tmp_path):
        source = write_jsonl(tmp_path / "in.jsonl", [self.RECORD])
        first, second = tmp_path / "once.jsonl", tmp_path / "twice.jsonl"
        assert prep_file(source, first) == 6
        assert prep_file(first, second) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_clean_lines_copied_verbatim(self, tmp_path):
        source = tmp_path / "in.jsonl"
        source.write_text('{"b": 1,   "a": "plain"}\n', encoding="utf-8")
        out = tmp_path / "out.jsonl"
        prep_file(source, out)
        assert out.read_text(encoding="utf-8") == '{"b": 1,   "a": "plain"}\n'

    def test_custom_token_list(self, tmp_path):
        tokens = tmp_path / "tokens.txt"
        tokens.write_text("# reflection markers\n<extra>\n\n[X]\n", encoding="utf-8")
        assert load_token_list(tokens) == ["<extra>", "[X]"]
        (stripped,), removed = strip_special_tokens([{"t": "a<extra>b [X] c"}], load_token_list(tokens))
        assert stripped == {"t": "ab c"}
        assert removed == 2

    def test_empty_token_list_rejected(self):
        with pytest.raises(UsageError):
            strip_special_tokens([{"t": "x"}], [])

    def test_default_tokens_cover_reflection_vocabulary(self):
        tokens = default_special_tokens()
        assert "[Retrieval]" in tokens and "[Utility:1]" in tokens and "</paragraph>" in tokens

    def test_invalid_json(self, tmp_path):
        source = tmp_path / "in.jsonl"
        source.write_text("{broken\n", encoding="utf-8")
        with pytest.raises(DatasetError):
            prep_file(source, tmp_path / "out.jsonl")
