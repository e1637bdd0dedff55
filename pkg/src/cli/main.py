"""
Batch front-end.

Each subcommand is one pipeline stage that reads the previous stage's
files from the run's work directory and writes its own, together with a
``manifest_<stage>.json`` holding the hashes needed to reproduce it::

    ingest     -> facts.jsonl, ingest_report.json
    index      -> index.json
    decompose  -> trees.jsonl
    solve      -> solved.jsonl
    eval       -> eval_summary.json, eval_tables.txt[, recall_curve.png]
    stats      -> stats.txt
"""

import json
import sys
from argparse import ArgumentParser
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from tqdm import tqdm

from ..core.embedders import CachedEmbedder, EmbeddingCache, HashedNgramEmbedder, RemoteEmbedder
from ..core.errors import (
    ConfigError, DepthExceeded, MalformedLine, PlaceholderViolation, StageError, TkgIoError, TkgqaError,
)
from ..core.facts import TkgFormat, dump_facts, load_tkg
from ..core.log_utils import get_logger, set_verbose
from ..core.retriever import FactRetriever
from ..core.verbalizer import load_surface_forms
from ..evaluation.dataset import file_hash, load_dataset, sample_questions
from ..evaluation.metrics import build_record, recall_curve, summarize_records, tree_stats
from ..evaluation.reports import efficiency_table, plot_recall_curve, results_tables
from ..llm.gateway import LlmGateway, LlmMode, OpenAIChatTransport
from ..reasoning.decomposer import Decomposer, classify_question
from ..reasoning.solver import RecursiveSolver, SolverConfig
from ..reasoning.time_standardizer import standardize_time
from ..reasoning.tree import QueryTree
from .config import load_config

logger = get_logger(__name__)

FACTS_FILE = "facts.jsonl"
INGEST_REPORT_FILE = "ingest_report.json"
INDEX_FILE = "index.json"
TREES_FILE = "trees.jsonl"
SOLVED_FILE = "solved.jsonl"
SUMMARY_FILE = "eval_summary.json"
TABLES_FILE = "eval_tables.txt"
CURVE_FILE = "recall_curve.png"
STATS_FILE = "stats.txt"


######################## FILE HELPERS ##############################
def _read_jsonl(path):
    path = Path(path)
    if not path.exists():
        raise TkgIoError(f"missing stage file {path}; run the previous stage first")
    try:
        lines = path.read_bytes().splitlines()
    except OSError as exc:
        raise TkgIoError(f"cannot read stage file {path}: {exc}") from exc
    rows = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line.decode("utf-8"))
        except ValueError as exc:
            raise MalformedLine(line_no, f"{path.name} is corrupt: {exc}") from exc
        if not isinstance(row, dict):
            raise MalformedLine(line_no, f"{path.name} holds a non-object row")
        rows.append(row)
    return rows


def _write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def _write_json(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(config, stage, outputs, corpus_hash=None):
    manifest = {
        "stage": stage,
        "config_hash": config.config_hash(),
        "corpus_hash": corpus_hash,
        "dataset_hash": file_hash(config.dataset_path),
        "fixture_hash": file_hash(config.fixture_path) if config.llm_mode is LlmMode.SCRIPTED else None,
        "outputs": {Path(p).name: file_hash(p) for p in outputs},
    }
    _write_json(config.work_dir / f"manifest_{stage}.json", manifest)
    return manifest


######################## BUILDERS ##############################
def load_store(config):
    """Reads the ingested facts of a run."""
    path = config.work_dir / FACTS_FILE
    if not path.exists():
        raise TkgIoError(f"missing stage file {path}; run ingest first")
    return load_tkg(path, TkgFormat.JSON_LINES)


def make_embedder(config):
    if config.embedder == "hashed":
        return HashedNgramEmbedder(dim=config.embed_dim)
    remote = RemoteEmbedder(config.embed_model, base_url=config.base_url, api_key_env=config.api_key_env)
    return CachedEmbedder(remote, EmbeddingCache(config.cache_dir / "embeddings"))


def make_retriever(config, store=None):
    store = store if store is not None else load_store(config)
    surface_forms = load_surface_forms(config.surface_forms_path) if config.surface_forms_path else None
    return FactRetriever.build(store, make_embedder(config), config.index_backend, surface_forms)


def _indexed_retriever(config):
    """Rebuilds the retriever and checks it against the recorded index description."""
    retriever = make_retriever(config)
    path = config.work_dir / INDEX_FILE
    if path.exists():
        try:
            recorded = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigError(f"{path} is corrupt; rerun index") from exc
        if (not isinstance(recorded, dict) or recorded.get("embedder") != retriever.index.embedder.backend_id
                or recorded.get("corpus_hash") != retriever.store.content_hash()):
            raise ConfigError(f"{path} was built with another embedder or corpus; rerun index")
    return retriever


def make_gateway(config):
    if config.llm_mode is LlmMode.SCRIPTED:
        if config.fixture_path is None:
            raise ConfigError("scripted mode needs fixture_path")
        return LlmGateway.from_fixture_file(config.fixture_path, parallelism=config.parallelism)
    if config.llm_mode is LlmMode.CACHED:
        return LlmGateway(LlmMode.CACHED, cache_dir=config.cache_dir / "llm", parallelism=config.parallelism)
    transport = OpenAIChatTransport(config.base_url, config.api_key_env, config.request_timeout)
    return LlmGateway(
        LlmMode.LIVE, cache_dir=config.cache_dir / "llm", transport=transport,
        max_retries=config.max_retries, parallelism=config.parallelism,
    )


def _load_questions(config):
    if config.dataset_path is None:
        raise ConfigError("dataset_path is required")
    return sample_questions(load_dataset(config.dataset_path), config.limit, config.seed)


def _for_each_question(config, fn, items, desc):
    """Runs ``fn`` over ``items`` on the worker pool; results keep input order."""
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=None))


def _guarded(question_id, fn):
    try:
        return fn()
    except StageError:
        raise
    except TkgqaError as exc:
        raise StageError(f"{type(exc).__name__}: {exc}", question_id) from exc


def _record_fixtures(config, gateway):
    if config.record_fixture_path is not None:
        gateway.export_fixtures(config.record_fixture_path, merge=True)


######################## STAGES ##############################
def cmd_ingest(config):
    """Loads the TKG file and writes the normalised fact list."""
    if config.tkg_path is None:
        raise ConfigError("tkg_path is required")
    store = load_tkg(config.tkg_path, config.tkg_format, lenient=config.lenient)
    facts_path = config.work_dir / FACTS_FILE
    report_path = config.work_dir / INGEST_REPORT_FILE
    dump_facts(store, facts_path)
    report = {
        "loaded": store.report.loaded,
        "duplicates": store.report.duplicates,
        "skipped": store.report.skipped,
        "entities": len(store.entities),
        "predicates": len(store.predicates),
        "corpus_hash": store.content_hash(),
    }
    _write_json(report_path, report)
    _write_manifest(config, "ingest", [facts_path, report_path], store.content_hash())
    return report


def cmd_index(config):
    """Verbalizes and embeds the ingested facts and records the index description."""
    store = load_store(config)
    retriever = make_retriever(config, store)
    index_path = config.work_dir / INDEX_FILE
    description = {
        "backend": retriever.index.backend.value,
        "embedder": retriever.index.embedder.backend_id,
        "dim": retriever.index.dim,
        "entries": len(retriever.index),
        "corpus_hash": store.content_hash(),
    }
    _write_json(index_path, description)
    _write_manifest(config, "index", [index_path], store.content_hash())
    return description


def cmd_decompose(config, gateway=None):
    """Classifies and decomposes every question into a tree."""
    questions = _load_questions(config)
    gateway = gateway or make_gateway(config)
    decomposer = Decomposer(
        gateway, model_id=config.decompose_model, temperature=config.temperature, max_depth=config.max_depth,
        strict=config.strict_decomposition, use_decomposition=config.use_decomposition,
    )

    def _decompose(row):
        def _run():
            qtype = classify_question(row["question"], row.get("qtype"))
            gold = row.get("answers") or []
            gold_answer = gold[0] if gold else None
            try:
                tree = decomposer.decompose(row["question"], qtype, tag=row["question_id"], gold_answer=gold_answer)
            except (PlaceholderViolation, DepthExceeded) as exc:
                if config.strict_decomposition:
                    raise
                logger.warning(f"Answering {row['question_id']} without decomposition: {exc}")
                tree = QueryTree.leaf_only(standardize_time(row["question"]), qtype, gold_answer,
                                           gateway.calls_for(row["question_id"]))
            return {
                "question_id": row["question_id"],
                "question": row["question"],
                "qtype": qtype.to_dict(),
                "tree": tree.to_dict(),
            }
        return _guarded(row["question_id"], _run)

    rows = _for_each_question(config, _decompose, questions, "decompose")
    trees_path = config.work_dir / TREES_FILE
    _write_jsonl(trees_path, rows)
    _record_fixtures(config, gateway)
    _write_manifest(config, "decompose", [trees_path])
    return {"questions": len(rows), "llm_calls": gateway.total_calls}


def cmd_solve(config, gateway=None, retriever=None):
    """Solves every decomposed question tree."""
    rows = _read_jsonl(config.work_dir / TREES_FILE)
    gateway = gateway or make_gateway(config)
    if retriever is None and config.use_retrieval:
        retriever = _indexed_retriever(config)
    solver = RecursiveSolver(retriever, gateway, SolverConfig(
        top_k=config.top_k,
        max_depth=config.max_depth,
        reason_model=config.reason_model,
        aggregate_model=config.aggregate_model,
        temperature=config.temperature,
        aggregation_mode=config.aggregation_mode,
        use_multi_answer=config.use_multi_answer,
        use_retrieval=config.use_retrieval,
        verify_constraints=config.verify_constraints,
    ))

    def _solve(row):
        def _run():
            tree = QueryTree.from_dict(row["tree"])
            return solver.solve_tree(tree, tag=row["question_id"]).to_dict(row["question_id"])
        return _guarded(row["question_id"], _run)

    solved = _for_each_question(config, _solve, rows, "solve")
    solved_path = config.work_dir / SOLVED_FILE
    _write_jsonl(solved_path, solved)
    _record_fixtures(config, gateway)
    corpus_hash = retriever.store.content_hash() if retriever is not None else None
    _write_manifest(config, "solve", [solved_path], corpus_hash)
    return {"questions": len(solved), "llm_calls": gateway.total_calls, "network_calls": gateway.network_calls}


def cmd_eval(config, retriever=None):
    """Scores the solved questions against the dataset and writes the report tables."""
    solved = _read_jsonl(config.work_dir / SOLVED_FILE)
    dataset = {row["question_id"]: row for row in load_dataset(config.dataset_path)} if config.dataset_path else {}
    records = []
    for row in solved:
        if row["question_id"] not in dataset:
            raise StageError("solved question is missing from the dataset", row["question_id"])
        records.append(build_record(row, dataset[row["question_id"]]))

    curve = None
    annotated = [
        (row["question_id"], dataset[row["question_id"]]["question"], dataset[row["question_id"]].get("gold_fact_ids"))
        for row in solved
        if "gold_fact_ids" in dataset[row["question_id"]]
    ]
    if annotated:
        retriever = retriever or _indexed_retriever(config)
        curve = recall_curve(annotated, retriever.index, config.recall_ns)

    summary = summarize_records(records, curve)
    summary_path = config.work_dir / SUMMARY_FILE
    tables_path = config.work_dir / TABLES_FILE
    _write_json(summary_path, summary.to_dict())
    tables_path.write_text(results_tables(records, summary), encoding="utf-8")
    outputs = [summary_path, tables_path]
    if summary.recall and summary.recall["recall"]:
        outputs.append(plot_recall_curve(summary.recall, config.work_dir / CURVE_FILE))
    _write_manifest(config, "eval", outputs)
    return summary.to_dict()


def cmd_stats(config):
    """Averages tree depth, branch and API calls over the solved questions."""
    solved = _read_jsonl(config.work_dir / SOLVED_FILE)
    stats = tree_stats([(QueryTree.from_dict(row["tree"]), row["api_calls"]) for row in solved])
    stats_path = config.work_dir / STATS_FILE
    stats_path.write_text(efficiency_table(stats) + "\n", encoding="utf-8")
    _write_manifest(config, "stats", [stats_path])
    return {"avg_depth": stats.avg_depth, "avg_branch": stats.avg_branch, "avg_api_calls": stats.avg_api_calls}


STAGES = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "decompose": cmd_decompose,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "stats": cmd_stats,
}


######################## ENTRY POINT ##############################
def build_parser():
    parser = ArgumentParser(prog="tkgqa", description="Temporal KG question answering pipeline")
    parser.add_argument("command", choices=sorted(STAGES), help="Pipeline stage to run")
    parser.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    parser.add_argument("--work-dir", type=Path, default=None, help="Directory holding the stage files")
    parser.add_argument("--tkg", dest="tkg_path", type=Path, default=None, help="TKG file (ingest)")
    parser.add_argument("--dataset", dest="dataset_path", type=Path, default=None, help="Question file")
    parser.add_argument("--llm-mode", choices=[m.value for m in LlmMode], default=None, help="LLM backend mode")
    parser.add_argument("--fixtures", dest="fixture_path", type=Path, default=None,
                        help="Scripted fixture file (scripted mode)")
    parser.add_argument("--record-fixtures", dest="record_fixture_path", type=Path, default=None,
                        help="Export the responses of this run as a scripted fixture file")
    parser.add_argument("--model", default=None, help="Model id for every stage")
    parser.add_argument("--temperature", type=float, default=None, help="Sampling temperature (default: 0)")
    parser.add_argument("--top-k", type=int, default=None, help="Facts retrieved per question (default: 50)")
    parser.add_argument("--limit", type=int, default=None, help="Only process the first n questions")
    parser.add_argument("--seed", type=int, default=None, help="Sample --limit questions at random with this seed")
    parser.add_argument("--parallelism", type=int, default=None, help="Questions processed concurrently")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    return parser


def _overrides(args):
    overrides = {
        "work_dir": args.work_dir,
        "tkg_path": args.tkg_path,
        "dataset_path": args.dataset_path,
        "llm_mode": args.llm_mode,
        "fixture_path": args.fixture_path,
        "record_fixture_path": args.record_fixture_path,
        "temperature": args.temperature,
        "top_k": args.top_k,
        "limit": args.limit,
        "seed": args.seed,
        "parallelism": args.parallelism,
    }
    if args.model:
        overrides.update(decompose_model=args.model, reason_model=args.model, aggregate_model=args.model)
    return overrides


def error_report(exc):
    """One-line machine-readable description of a failed run."""
    cause = exc.__cause__ if isinstance(exc, StageError) and exc.__cause__ is not None else exc
    return {
        "error": type(cause).__name__,
        "message": str(exc),
        "question_id": getattr(exc, "question_id", None),
    }


def main(argv=None):
    args = build_parser().parse_args(argv)
    set_verbose(args.verbose)
    try:
        config = load_config(args.config, _overrides(args))
        result = STAGES[args.command](config)
    except TkgqaError as exc:
        print(json.dumps(error_report(exc), ensure_ascii=False), file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, TypeError) as exc:
        logger.debug("unexpected input error", exc_info=True)
        print(json.dumps(error_report(exc), ensure_ascii=False), file=sys.stderr)
        return 2
    logger.info(f"{args.command} finished: {json.dumps(result, sort_keys=True, default=str)}")
    if args.command == "eval":
        print((config.work_dir / TABLES_FILE).read_text(encoding="utf-8"))
    return 0
