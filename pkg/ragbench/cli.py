"""
Command Line
`ragbench` entrypoint: eval, interact, build-index, serve-retriever, prep-data.

Exit codes: 0 success, 1 runtime failure, 2 configuration / usage / input format.
"""

import argparse
import asyncio
import json
import sys
from typing import Callable, List, Optional, Sequence

from loguru import logger
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from ragbench import __version__
from ragbench.algorithms import (
    DecisionStep,
    GenerationStep,
    GenerationTrack,
    InferenceError,
    InferenceMode,
    NaiveRag,
    RetrievalStep,
    create_algorithm,
)
from ragbench.config import configure_logging, get_settings, load_batch, load_config
from ragbench.errors import RagBenchError, UsageError
from ragbench.evaluation import EvalReport, apply_preset, evaluate_batch, evaluate_run, get_preset, load_token_list, prep_file
from ragbench.instructions.lab import check_names
from ragbench.retrieval import CorpusFormat, build_index, ingest_corpus
from ragbench.retrieval.corpus import DEFAULT_CHUNK_WORDS
from ragbench.runtime import build_runtime

console = Console()
err_console = Console(stderr=True)

PROMPT = "ragbench> "
QUIT_COMMANDS = {":quit", ":q", ":exit"}


# =============================================================================
# Rendering
# =============================================================================

def _truncate(text: str, width: int = 80) -> str:
    text = " ".join(text.split())
    return text if len(text) <= width else text[: width - 3] + "..."


def aggregates_table(report: EvalReport) -> Table:
    table = Table(title=f"{report.run_id} ({report.scored}/{report.items} scored, {report.errored} errored)")
    table.add_column("metric")
    table.add_column("mean", justify="right")
    for metric, value in report.aggregates.items():
        table.add_row(metric, f"{value:.4f}")
    return table


def comparison_table(labels: Sequence[str], reports: Sequence[EvalReport]) -> Table:
    metrics: List[str] = []
    for report in reports:
        metrics.extend(m for m in report.aggregates if m not in metrics)
    table = Table(title="comparison")
    table.add_column("algorithm")
    for metric in metrics:
        table.add_column(metric, justify="right")
    table.add_column("errored", justify="right")
    for label, report in zip(labels, reports):
        cells = [f"{report.aggregates[m]:.4f}" if m in report.aggregates else "-" for m in metrics]
        table.add_row(label, *cells, str(report.errored))
    return table


def track_table(track: GenerationTrack) -> Table:
    """One row per step: retrievals with titles/scores, decisions with values"""
    table = Table(title="generation track", show_lines=False)
    table.add_column("#", justify="right")
    table.add_column("step")
    table.add_column("detail")
    for i, step in enumerate(track.steps, start=1):
        if isinstance(step, RetrievalStep):
            hits = "; ".join(f"{p.title or p.id} ({p.score:.2f})" for p in step.passages) or "no passages"
            cache = " (cached)" if step.cache_hit else ""
            table.add_row(str(i), "retrieve", escape(f"{_truncate(step.query, 60)!r} k={step.k}{cache}: {hits}"))
        elif isinstance(step, GenerationStep):
            table.add_row(str(i), f"generate:{escape(step.role)}", escape(_truncate(step.output.text)))
        elif isinstance(step, DecisionStep):
            table.add_row(str(i), f"decide:{escape(step.kind)}", escape(_truncate(json.dumps(step.value, default=str))))
    return table


# =============================================================================
# Interact
# =============================================================================

class InteractSession:
    """
    Line-oriented REPL state.

    Usage:
        session = InteractSession(algorithm)
        while await session.handle_line(input(PROMPT)):
            pass
    """

    def __init__(self, algorithm: NaiveRag, out: Optional[Console] = None):
        self.algorithm = algorithm
        self.out = out or console
        self.last_track: Optional[GenerationTrack] = None

    async def handle_line(self, line: str) -> bool:
        """Process one input line; False means quit"""
        line = line.strip()
        if not line:
            return True
        if line in QUIT_COMMANDS:
            return False
        if line == ":track json":
            if self.last_track is None:
                self.out.print("[yellow]no track yet[/yellow]")
            else:
                self.out.print_json(self.last_track.model_dump_json())
            return True
        if line.startswith(":"):
            self.out.print(f"[yellow]unknown command {escape(line)!r}; try :quit or :track json[/yellow]")
            return True

        try:
            answer, track = await self.algorithm.inference(line, mode=InferenceMode.INTERACT)
        except InferenceError as e:
            self.last_track = e.track
            self.out.print(f"[red]error:[/red] {escape(str(e))}")
            return True
        self.last_track = track
        self.out.print(f"[bold green]{escape(answer)}[/bold green]")
        self.out.print(track_table(track))
        return True


async def run_repl(session: InteractSession, read_line: Callable[[], Optional[str]]) -> None:
    """Feed lines to the session until quit or end of input"""
    while True:
        line = await asyncio.to_thread(read_line)
        if line is None or not await session.handle_line(line):
            return


def _read_stdin() -> Optional[str]:
    try:
        return console.input(PROMPT)
    except EOFError:
        return None


# =============================================================================
# Commands
# =============================================================================

async def _eval(args: argparse.Namespace) -> int:
    if args.batch:
        members = load_batch(args.batch, args.set)
        reports = await evaluate_batch(members)
        for report in reports:
            console.print(aggregates_table(report))
        console.print(comparison_table([name for name, _ in members], reports))
    else:
        report = await evaluate_run(load_config(args.config, args.set))
        console.print(aggregates_table(report))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if not args.config and not args.batch:
        raise UsageError("eval needs -c CONFIG or --batch BATCH")
    return asyncio.run(_eval(args))


async def _interact(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.set)
    runtime = build_runtime(config)
    try:
        rag = apply_preset(config, get_preset(config.benchmark, config.presets_path) if config.benchmark else None)
        algorithm = create_algorithm(config.algorithm, rag, runtime.gateway, runtime.retriever, runtime.instructions)
        check_names(runtime.instructions, rag.system_instruction, rag.task_instruction, algorithm.instruction_names())
        runtime.gateway.check_roles(algorithm.roles())
        console.print(f"[bold]{algorithm.name}[/bold] ready; :quit exits, :track json dumps the last track")
        await run_repl(InteractSession(algorithm), _read_stdin)
    finally:
        await runtime.close()
    return 0


def cmd_interact(args: argparse.Namespace) -> int:
    return asyncio.run(_interact(args))


def cmd_build_index(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus, args.format, chunk_words=args.chunk_words)
    index = build_index(corpus)
    out = index.save(args.output)
    stats = index.stats(documents=corpus.documents)

    table = Table(title=f"index {out}")
    table.add_column("field")
    table.add_column("value", justify="right")
    for field, value in stats.model_dump().items():
        table.add_row(field, str(value))
    console.print(table)
    return 0


def cmd_serve_retriever(args: argparse.Namespace) -> int:
    from ragbench.retrieval.server import serve

    settings = get_settings()
    index = args.index or settings.index_path
    if not index:
        raise UsageError("serve-retriever needs --index or RAGBENCH_INDEX_PATH")
    server = serve(
        index,
        args.addr or settings.retriever_addr,
        cache_path=args.cache or settings.cache_path,
        max_entries=args.max_cache_entries,
    )
    # uvicorn turns SIGINT/SIGTERM into a graceful shutdown that persists the cache
    server.run()
    return 0


def cmd_prep_data(args: argparse.Namespace) -> int:
    tokens = load_token_list(args.tokens) if args.tokens else None
    removed = prep_file(args.input, args.output, tokens)
    console.print(f"removed {removed} special-token occurrences -> {args.output}")
    return 0


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragbench",
        description="Run, trace and compare retrieval-augmented generation algorithms.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="loguru level (default: RAGBENCH_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate an algorithm (or a comparison batch) on a benchmark")
    p.add_argument("-c", "--config", help="run config YAML")
    p.add_argument("--batch", help="comparison batch YAML (base config + algorithms)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted-path override, repeatable")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("interact", help="answer queries line by line and show their tracks")
    p.add_argument("-c", "--config", help="run config YAML")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted-path override, repeatable")
    p.set_defaults(handler=cmd_interact)

    p = sub.add_parser("build-index", help="ingest a corpus and write a BM25 index")
    p.add_argument("corpus", help="corpus file")
    p.add_argument("-o", "--output", required=True, help="index file to write")
    p.add_argument("--format", choices=[f.value for f in CorpusFormat], default=CorpusFormat.DPR_TSV.value)
    p.add_argument("--chunk-words", type=int, default=DEFAULT_CHUNK_WORDS, help="max words per passage")
    p.set_defaults(handler=cmd_build_index)

    p = sub.add_parser("serve-retriever", help="serve an index over HTTP with a query cache")
    p.add_argument("--index", help="index file (default: RAGBENCH_INDEX_PATH)")
    p.add_argument("--addr", help="HOST:PORT (default: RAGBENCH_RETRIEVER_ADDR)")
    p.add_argument("--cache", help="cache journal, loaded at start and persisted on shutdown")
    p.add_argument("--max-cache-entries", type=int, default=None, help="LRU bound for the cache")
    p.set_defaults(handler=cmd_serve_retriever)

    p = sub.add_parser("prep-data", help="strip reflection/special tokens from JSONL training data")
    p.add_argument("input", help="input JSONL")
    p.add_argument("output", help="output JSONL")
    p.add_argument("--tokens", help="token list file, one per line (default: reflection vocabulary)")
    p.set_defaults(handler=cmd_prep_data)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level or get_settings().log_level)

    try:
        return args.handler(args)
    except RagBenchError as e:
        logger.debug(f"{type(e).__name__}: {e}")
        err_console.print(f"[red]{type(e).__name__}:[/red] {escape(str(e))}", highlight=False)
        return e.exit_code
    except KeyboardInterrupt:
        err_console.print("interrupted")
        return 1


if __name__ == "__main__":
    sys.exit(main())
