"""Instruction pools: loading, validation, rendering."""

import pytest

from ragbench.errors import ConfigError
from ragbench.instructions import (
    InstructionLoadError,
    InstructionPool,
    InstructionStore,
    InstructionTemplate,
    PromptAssembly,
    RenderError,
    check_names,
    format_choices,
    format_passages,
    load_pools,
)
from ragbench.retrieval import Passage


def write(tmp_path, text):
    path = tmp_path / "instructions.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoading:
    def test_packaged_pools(self, instructions):
        assert "default" in instructions.names("system")
        assert {"popqa", "arc", "asqa"} <= set(instructions.names("task"))
        assert {"direct", "naive_rag", "self_ask", "self_rag"} <= set(instructions.names("algorithm"))

    def test_undeclared_placeholder_rejected(self, tmp_path):
        path = write(
            tmp_path,
            "system: []\ntask:\n  - name: t\n    placeholders: [query]\n    template: 'Q: {query} {extra}'\nalgorithm: []\n",
        )
        with pytest.raises(InstructionLoadError) as exc:
            load_pools(path)
        assert exc.value.template == "t"
        assert exc.value.placeholder == "extra"

    def test_duplicate_name_rejected(self, tmp_path):
        path = write(
            tmp_path,
            "task:\n  - {name: t, template: a}\n  - {name: t, template: b}\n",
        )
        with pytest.raises(InstructionLoadError):
            load_pools(path)

    def test_unknown_pool_rejected(self, tmp_path):
        with pytest.raises(InstructionLoadError):
            load_pools(write(tmp_path, "prompts: []\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InstructionLoadError):
            load_pools(tmp_path / "nope.yaml")

    def test_unknown_name(self, instructions):
        with pytest.raises(ConfigError):
            instructions.get(InstructionPool.TASK, "nope")
        with pytest.raises(ConfigError) as exc:
            check_names(instructions, "nope", "popqa", ["naive_rag", "missing"])
        assert len(exc.value.fields) == 2


class TestRendering:
    def store(self):
        return InstructionStore(
            [
                InstructionTemplate(name="sys", pool="system", template="You are helpful."),
                InstructionTemplate(name="qa", pool="task", template="Question: {query}", placeholders=["query"]),
                InstructionTemplate(
                    name="rag",
                    pool="algorithm",
                    template="{passages}\n\n{task}\nAnswer:",
                    placeholders=["passages", "task"],
                ),
            ]
        )

    def test_render_combines_pools(self):
        passages = [Passage(id=0, title="Paris", text="Capital of France.")]
        prompt = self.store().render(
            PromptAssembly(system="sys", task="qa", algorithm="rag", bindings={"query": "Where?", "passages": passages})
        )
        assert prompt == "You are helpful.\n\n[1] Paris\nCapital of France.\n\nQuestion: Where?\nAnswer:"

    def test_render_without_system(self):
        prompt = self.store().render(
            PromptAssembly(system=None, task="qa", algorithm="rag", bindings={"query": "Q", "passages": "P"})
        )
        assert prompt == "P\n\nQuestion: Q\nAnswer:"

    def test_render_is_deterministic(self):
        assembly = PromptAssembly(system="sys", task="qa", algorithm="rag", bindings={"query": "Q", "passages": []})
        store = self.store()
        assert store.render(assembly) == store.render(assembly)

    def test_unbound_placeholder(self):
        with pytest.raises(RenderError) as exc:
            self.store().render(PromptAssembly(task="qa", algorithm="rag", bindings={"passages": []}))
        assert exc.value.placeholder == "query"

    def test_literal_braces_survive_values(self, instructions):
        prompt = instructions.render(
            PromptAssembly(system=None, task="popqa", algorithm="direct", bindings={"query": "what is {x}?"})
        )
        assert "what is {x}?" in prompt

    def test_formatters(self):
        assert format_passages([{"title": "A", "text": "a"}, {"title": "B", "text": "b"}]) == "[1] A\na\n\n[2] B\nb"
        assert format_choices([{"label": "A", "text": "cat"}, {"label": "B", "text": "dog"}]) == "A. cat\nB. dog"

    def test_multiple_choice_task(self, instructions):
        prompt = instructions.render(
            PromptAssembly(
                system=None,
                task="arc",
                algorithm="direct",
                bindings={"query": "Which?", "choices": [{"label": "A", "text": "x"}, {"label": "B", "text": "y"}]},
            )
        )
        assert "A. x\nB. y" in prompt
