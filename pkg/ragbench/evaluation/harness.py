"""
Evaluation Harness
Runs an algorithm over a benchmark under the alignment contract: every shared
component (seed, generator, retriever, instructions, benchmark) is digested into
the run's fingerprint, per-item results are journaled for resume, and
aggregates are written as TSV and aligned-text tables.
"""

import asyncio
import hashlib
import json
import os
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, TextIO, Tuple, Union

import pandas as pd
from loguru import logger

from ragbench.algorithms import AlgorithmConfig, GenerationTrack, InferenceError, NaiveRag, create_algorithm
from ragbench.errors import ConfigError
from ragbench.instructions.lab import check_names
from ragbench.instructions.models import InstructionPool
from ragbench.runtime import Runtime, build_runtime

from .datasets import DatasetError, load_dataset, sample_sequential
from .metrics import score_item
from .models import AlignmentFingerprint, BenchmarkItem, BenchmarkPreset, EvalReport, ItemRecord, KeyMap
from .presets import get_preset

if TYPE_CHECKING:
    from ragbench.config import RunConfig

ITEMS_FILE = "items.jsonl"
TRACKS_FILE = "tracks.jsonl"
REPORT_FILE = "report.json"
AGGREGATES_TSV = "aggregates.tsv"
AGGREGATES_TXT = "aggregates.txt"
COMPARISON_TSV = "comparison.tsv"
COMPARISON_TXT = "comparison.txt"

DEFAULT_METRICS = ["accuracy", "em", "f1"]
SHARED_COMPONENTS = ("seed", "generator", "retriever", "instructions", "benchmark")
SHORT_ANSWER_METRICS = ("str_em", "str_hit")
FLOAT_FORMAT = "%.6f"


class AlignmentError(ConfigError):
    """Runs in one comparison batch do not share their common components"""
    pass


# =============================================================================
# Planning
# =============================================================================

def apply_preset(config: "RunConfig", preset: Optional[BenchmarkPreset] = None) -> AlgorithmConfig:
    """
    AlgorithmConfig with the run seed and the preset's defaults applied.

    Preset values only fill fields the config does not set explicitly.
    """
    rag = config.rag
    generation_updates: Dict[str, Any] = {"seed": config.seed}
    updates: Dict[str, Any] = {}
    if preset is not None:
        if "n_docs" not in rag.model_fields_set:
            updates["n_docs"] = preset.n_docs
        if "task_instruction" not in rag.model_fields_set:
            updates["task_instruction"] = preset.task_instruction
        if "max_new_tokens" not in rag.generation.model_fields_set:
            generation_updates["max_new_tokens"] = preset.max_new_tokens
    updates["generation"] = rag.generation.model_copy(update=generation_updates)
    return rag.model_copy(update=updates)


def file_digest(path: Union[str, Path]) -> str:
    sha = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


async def alignment_fingerprint(
    config: "RunConfig",
    rag: AlgorithmConfig,
    algorithm: NaiveRag,
    keymap: KeyMap,
    metrics: Sequence[str],
    dataset_digest: str,
) -> AlignmentFingerprint:
    """Digest of the shared components plus the algorithm's own settings"""
    store = algorithm.instructions
    pool = config.generators

    index = None
    if algorithm.retriever is not None:
        info = await algorithm.retriever.describe()
        index = {"corpus_fingerprint": info.corpus_fingerprint, "config_digest": info.config_digest}

    def template(kind: InstructionPool, name: Optional[str]) -> Optional[str]:
        return store.get(kind, name).template if name else None

    parts = {
        "seed": config.seed,
        "generator": {
            "role": rag.generator_role,
            "endpoint": pool.endpoints[pool.resolve(rag.generator_role)].model_dump(mode="json"),
            "params": rag.generation.model_dump(mode="json"),
        },
        "retriever": {
            "index": index,
            "n_docs": rag.n_docs,
            "endpoint": config.retriever.endpoint,
            "index_path": config.retriever.index_path,
        },
        "instructions": {
            "system": rag.system_instruction,
            "task": rag.task_instruction,
            "system_text": template(InstructionPool.SYSTEM, rag.system_instruction),
            "task_text": template(InstructionPool.TASK, rag.task_instruction),
        },
        "benchmark": {
            "benchmark": config.benchmark,
            "dataset": dataset_digest,
            "keymap": keymap.model_dump(mode="json"),
            "sample_size": config.sample_size,
            "metrics": list(metrics),
        },
        "algorithm": {
            "name": algorithm.name,
            "instructions": {n: template(InstructionPool.ALGORITHM, n) for n in algorithm.instruction_names()},
            "roles": {r: pool.resolve(r) for r in algorithm.roles()},
            "settings": rag.model_dump(mode="json").get(algorithm.name),
        },
    }
    return AlignmentFingerprint.from_components(parts)


class RunPlan:
    """A fully resolved run, ready to execute"""

    def __init__(
        self,
        label: str,
        config: "RunConfig",
        rag: AlgorithmConfig,
        algorithm: NaiveRag,
        items: List[BenchmarkItem],
        metrics: List[str],
        fingerprint: AlignmentFingerprint,
    ):
        self.label = label
        self.config = config
        self.rag = rag
        self.algorithm = algorithm
        self.items = items
        self.metrics = metrics
        self.fingerprint = fingerprint
        self.run_id = f"{label}-{config.benchmark or 'custom'}-{fingerprint.digest[:8]}"
        self.out_dir = Path(config.output_dir) / self.run_id


async def prepare_run(label: str, config: "RunConfig", runtime: Runtime) -> RunPlan:
    """
    Resolve presets, instructions, roles and the dataset before any inference.

    Raises:
        ConfigError: Missing dataset or unresolvable component
        DatasetError: Dataset does not match its key map or lacks metric references
    """
    if config.dataset is None:
        raise ConfigError("evaluation needs a dataset", fields=["dataset.path: required"])
    preset = get_preset(config.benchmark, config.presets_path) if config.benchmark else None
    keymap = config.dataset.keymap or (preset.keymap if preset else KeyMap())
    metrics = list(preset.metrics) if preset else list(DEFAULT_METRICS)

    rag = apply_preset(config, preset)
    algorithm = create_algorithm(config.algorithm, rag, runtime.gateway, runtime.retriever, runtime.instructions)
    check_names(runtime.instructions, rag.system_instruction, rag.task_instruction, algorithm.instruction_names())
    runtime.gateway.check_roles(algorithm.roles())

    items = sample_sequential(load_dataset(config.dataset.path, keymap), config.sample_size)
    check_metric_inputs(items, metrics)
    fingerprint = await alignment_fingerprint(
        config, rag, algorithm, keymap, metrics, file_digest(config.dataset.path)
    )
    return RunPlan(label, config.model_copy(update={"rag": rag}), rag, algorithm, items, metrics, fingerprint)


def check_metric_inputs(items: Sequence[BenchmarkItem], metrics: Sequence[str]) -> None:
    """
    Raises:
        DatasetError: An item lacks the references one of the metrics needs
    """
    if not any(name in SHORT_ANSWER_METRICS for name in metrics):
        return
    missing = [item.id for item in items if not item.short_answers]
    if missing:
        shown = ", ".join(missing[:5]) + (", ..." if len(missing) > 5 else "")
        raise DatasetError(f"{len(missing)} item(s) have no short answers for str_em/str_hit: {shown}")


def check_alignment(plans: Sequence[RunPlan]) -> None:
    """
    Raises:
        AlignmentError: A shared component differs between batch members
    """
    first = plans[0]
    problems = []
    for plan in plans[1:]:
        for component in plan.fingerprint.differing(first.fingerprint):
            if component in SHARED_COMPONENTS:
                problems.append(f"{plan.label}: {component} differs from {first.label}")
    if problems:
        raise AlignmentError("comparison batch is not aligned", fields=problems)


# =============================================================================
# Journal
# =============================================================================

def _read_jsonl_tolerant(path: Path) -> List[Dict[str, Any]]:
    """Parsed lines; an unparseable final line (interrupted write) is dropped"""
    if not path.is_file():
        return []
    lines = path.read_text(encoding="utf-8").splitlines()
    rows = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                logger.warning(f"Dropping torn last line of {path}")
                continue
            raise ConfigError(f"{path}: corrupt journal line {i + 1}; delete the run directory to start over")
    return rows


def load_journal(path: Path) -> Dict[str, ItemRecord]:
    """Completed (non-errored) records by item id; later lines win"""
    records: Dict[str, ItemRecord] = {}
    for row in _read_jsonl_tolerant(path):
        record = ItemRecord.model_validate(row)
        records[record.item_id] = record
    return {item_id: r for item_id, r in records.items() if not r.errored}


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


async def run_item(
    algorithm: NaiveRag, item: BenchmarkItem, index: int, metrics: Sequence[str]
) -> Tuple[ItemRecord, GenerationTrack]:
    """Infer and score one item; backend failures mark the record errored"""
    try:
        answer, track = await algorithm.run(item.question, item.bindings())
    except InferenceError as e:
        logger.warning(f"Item {item.id} failed: {e}")
        record = ItemRecord(
            index=index, item_id=item.id, question=item.question, track=e.track.summary(), error=str(e)
        )
        return record, e.track
    record = ItemRecord(
        index=index,
        item_id=item.id,
        question=item.question,
        answer=answer,
        scores=score_item(answer, item, metrics),
        track=track.summary(),
    )
    return record, track


# =============================================================================
# Execution
# =============================================================================

def aggregate(records: Sequence[ItemRecord], metrics: Sequence[str]) -> Tuple[Dict[str, float], pd.DataFrame]:
    """Metric means over non-errored records, plus the aggregate table"""
    scored = [r for r in records if not r.errored]
    frame = pd.DataFrame([r.scores for r in scored], columns=list(metrics))
    means = {m: float(frame[m].mean()) for m in metrics} if scored else {}
    table = pd.DataFrame(
        {
            "metric": list(metrics),
            "mean": [means.get(m, float("nan")) for m in metrics],
            "scored": len(scored),
            "errored": len(records) - len(scored),
        }
    )
    return means, table


async def execute_run(plan: RunPlan) -> EvalReport:
    """Run (or resume) a prepared plan and write its report files"""
    config = plan.config
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    items_path = plan.out_dir / ITEMS_FILE
    tracks_path = plan.out_dir / TRACKS_FILE

    done = load_journal(items_path)
    saved_tracks = {row["item_id"]: row for row in _read_jsonl_tolerant(tracks_path)} if config.save_tracks else {}
    pending = [(i, item) for i, item in enumerate(plan.items) if item.id not in done]
    if done:
        logger.info(f"[{plan.run_id}] resuming: {len(plan.items) - len(pending)} done, {len(pending)} pending")
    # drop torn tails and errored records before appending
    if items_path.exists():
        kept_records = [done[item.id] for item in plan.items if item.id in done]
        _atomic_write(items_path, "".join(r.model_dump_json() + "\n" for r in kept_records))
    if tracks_path.exists() and config.save_tracks:
        kept = [saved_tracks[item.id] for item in plan.items if item.id in done and item.id in saved_tracks]
        _atomic_write(tracks_path, "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in kept))

    semaphore = asyncio.Semaphore(config.max_concurrency)
    lock = asyncio.Lock()
    results: Dict[str, ItemRecord] = dict(done)

    with items_path.open("a", encoding="utf-8") as journal:
        tracks_file: Optional[TextIO] = tracks_path.open("a", encoding="utf-8") if config.save_tracks else None
        try:
            async def worker(index: int, item: BenchmarkItem) -> None:
                async with semaphore:
                    record, track = await run_item(plan.algorithm, item, index, plan.metrics)
                async with lock:
                    journal.write(record.model_dump_json() + "\n")
                    journal.flush()
                    results[item.id] = record
                    if tracks_file is not None:
                        row = {"item_id": item.id, "track": track.model_dump(mode="json")}
                        tracks_file.write(json.dumps(row, ensure_ascii=False) + "\n")
                        tracks_file.flush()
                        saved_tracks[item.id] = row

            await asyncio.gather(*(worker(i, item) for i, item in pending))
        finally:
            if tracks_file is not None:
                tracks_file.close()

    records = [results[item.id] for item in plan.items]
    _atomic_write(items_path, "".join(r.model_dump_json() + "\n" for r in records))
    if config.save_tracks:
        rows = [saved_tracks[item.id] for item in plan.items if item.id in saved_tracks]
        _atomic_write(tracks_path, "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows))

    aggregates, table = aggregate(records, plan.metrics)
    errored = sum(1 for r in records if r.errored)
    report = EvalReport(
        run_id=plan.run_id,
        algorithm=plan.algorithm.name,
        benchmark=config.benchmark or "custom",
        fingerprint=plan.fingerprint,
        config=config.model_dump(mode="json"),
        records=records,
        aggregates=aggregates,
        items=len(records),
        scored=len(records) - errored,
        errored=errored,
    )

    _atomic_write(plan.out_dir / REPORT_FILE, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    table.to_csv(plan.out_dir / AGGREGATES_TSV, sep="\t", index=False, float_format=FLOAT_FORMAT)
    (plan.out_dir / AGGREGATES_TXT).write_text(
        table.to_string(index=False, float_format=lambda v: FLOAT_FORMAT % v) + "\n", encoding="utf-8"
    )
    logger.info(
        f"[{plan.run_id}] {report.scored}/{report.items} scored, {errored} errored: "
        + ", ".join(f"{m}={v:.4f}" for m, v in aggregates.items())
    )
    return report


async def evaluate_run(
    config: "RunConfig",
    *,
    algorithm: Optional[NaiveRag] = None,
    runtime: Optional[Runtime] = None,
    label: Optional[str] = None,
) -> EvalReport:
    """
    Evaluate one algorithm on the configured benchmark.

    Usage:
        report = await evaluate_run(load_config("run.yaml"))

    Args:
        config: Run configuration with dataset settings
        algorithm: Use this algorithm's components (its name overrides config.algorithm)
        runtime: Shared components; built from config (and closed) when omitted
        label: Run label used in the run id (defaults to the algorithm name)

    Raises:
        ConfigError: Invalid or unresolvable configuration
        DatasetError: Dataset does not match its key map or lacks metric references
    """
    owned = runtime is None and algorithm is None
    if algorithm is not None:
        runtime = Runtime(algorithm.instructions, algorithm.gateway, algorithm.retriever)
        config = config.model_copy(update={"algorithm": algorithm.name})
    elif runtime is None:
        runtime = build_runtime(config)

    try:
        plan = await prepare_run(label or config.algorithm, config, runtime)
        return await execute_run(plan)
    finally:
        if owned:
            await runtime.close()


# =============================================================================
# Comparison Batches
# =============================================================================

def comparison_table(reports: Sequence[EvalReport], labels: Sequence[str]) -> pd.DataFrame:
    """Algorithm x metric table of aggregate means"""
    metrics: List[str] = []
    for report in reports:
        metrics.extend(m for m in report.aggregates if m not in metrics)
    rows = [{**{m: report.aggregates.get(m, float("nan")) for m in metrics}, "errored": report.errored} for report in reports]
    return pd.DataFrame(rows, index=pd.Index(list(labels), name="algorithm"), columns=metrics + ["errored"])


async def evaluate_batch(
    members: Sequence[Tuple[str, "RunConfig"]],
    runtime: Optional[Runtime] = None,
) -> List[EvalReport]:
    """
    Evaluate several algorithms under one alignment contract.

    All members are planned and checked for alignment before any inference;
    one report per member plus comparison.tsv / comparison.txt are written to
    the first member's output directory.

    Raises:
        AlignmentError: Shared components differ between members
    """
    if not members:
        raise ConfigError("comparison batch has no members")
    owned = runtime is None
    runtime = runtime or build_runtime(members[0][1])
    try:
        plans = [await prepare_run(label, config, runtime) for label, config in members]
        check_alignment(plans)
        reports = [await execute_run(plan) for plan in plans]
    finally:
        if owned:
            await runtime.close()

    table = comparison_table(reports, [p.label for p in plans])
    out_dir = Path(members[0][1].output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / COMPARISON_TSV, sep="\t", float_format=FLOAT_FORMAT)
    (out_dir / COMPARISON_TXT).write_text(table.to_string(float_format=lambda v: FLOAT_FORMAT % v) + "\n", encoding="utf-8")
    logger.info(f"Wrote comparison of {len(reports)} runs to {out_dir / COMPARISON_TSV}")
    return reports
