#!/usr/bin/env python3

"""
Demo script answering one temporal question over the small sample graph
in tests/fixtures, either with a live OpenAI-compatible endpoint or
offline from a fixture file written by --record-fixtures.
"""
import argparse
from pathlib import Path

from src.core import FactRetriever, HashedNgramEmbedder, load_surface_forms, load_tkg
from src.core.log_utils import set_verbose
from src.llm import LlmGateway, LlmMode, OpenAIChatTransport
from src.reasoning import Decomposer, RecursiveSolver, classify_question

FIXTURES = Path(__file__).parent / "tests" / "fixtures"


def build_retriever():
    """Indexes the sample graph"""
    store = load_tkg(FIXTURES / "sample_kg.tsv")
    surface_forms = load_surface_forms(FIXTURES / "surface_forms.json")
    return FactRetriever.build(store, HashedNgramEmbedder(), surface_forms=surface_forms)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--question", default="Before Georgios Papandreou, who was the last to visit China?")
    parser.add_argument("--base-url", default=None)
    parser.add_argument("--fixtures", type=Path, default=None, help="Replay a recorded fixture file offline")
    parser.add_argument("--cache-dir", type=Path, default=Path(".cache/tkgqa/llm"))
    parser.add_argument("--verbose", "-v", action="store_true")
    args = parser.parse_args()
    set_verbose(args.verbose)

    if args.fixtures is not None:
        gateway = LlmGateway.from_fixture_file(args.fixtures)
    else:
        gateway = LlmGateway(LlmMode.LIVE, cache_dir=args.cache_dir, transport=OpenAIChatTransport(args.base_url))
    tree = Decomposer(gateway).decompose(args.question, classify_question(args.question), tag="demo")
    solution = RecursiveSolver(build_retriever(), gateway).solve_tree(tree, tag="demo")

    for trace in sorted(solution.traces.values(), key=lambda t: t.seq):
        print(f"[{trace.node_idx}] {trace.question} -> {trace.final_answer.render()}")
    print(f"Answer: {solution.answer.render()} ({solution.api_calls} LLM calls)")
