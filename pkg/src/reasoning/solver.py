"""
Recursive post-order solving of question trees.

Leaves are answered from retrieved facts. A non-leaf node first solves its
sub-questions in order, substituting each ``#j`` placeholder with the
answer of sibling j, then summarizes the children into a child answer,
answers its own question from retrieved facts, and lets the aggregator
pick between the two.
"""

import re
from dataclasses import dataclass, field
from typing import Optional

from ..core.errors import DepthExceeded, LlmServiceError, MissingPlaceholderAnswer
from ..core.log_utils import get_logger
from ..core.retriever import DEFAULT_TOP_K
from ..core.timestamp import Ordering, compare_timestamps, parse_timestamp
from ..core.verbalizer import VerbalizedFact
from ..llm.gateway import DEFAULT_MODEL, LlmRequest
from ..llm.prompts import DEFAULT_PROMPTS, SOLVE_HISTORICAL, SOLVE_RELEVANT, render_prompt
from .aggregator import AggregationMode, CandidateSet, aggregate
from .answer import Answer, AnswerKind, AnswerSource, extract_answer
from .time_standardizer import standardize_time
from .tree import DEFAULT_MAX_DEPTH, PLACEHOLDER_RE

logger = get_logger(__name__)

SELECTION_CUE_RE = re.compile(r"\b(first|last|earliest|latest)\b|\bamong them\b", re.IGNORECASE)
CONSTRAINT_RE = re.compile(r"\b(before|after)\s+([0-9]{4}(?:-[0-9]{2}(?:-[0-9]{2})?)?)(?![-0-9])", re.IGNORECASE)
HITS_DEPTH = 10


@dataclass(frozen=True)
class SolverConfig:
    top_k: int = DEFAULT_TOP_K
    max_depth: int = DEFAULT_MAX_DEPTH
    reason_model: str = DEFAULT_MODEL
    aggregate_model: str = DEFAULT_MODEL
    temperature: float = 0.0
    aggregation_mode: AggregationMode = AggregationMode.RULES
    use_multi_answer: bool = True
    use_retrieval: bool = True
    verify_constraints: bool = False

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        object.__setattr__(self, "aggregation_mode", AggregationMode(self.aggregation_mode))


@dataclass
class SolveTrace:
    node_idx: int
    question: str
    retrieved_fact_ids: list
    facts: list
    ir_answer: Optional[Answer]
    child_answer: Optional[Answer]
    final_answer: Answer
    llm_calls: int
    seq: int
    constraint_violation: Optional[str] = None

    def to_dict(self, node):
        """Serializes the trace merged with the fields of its tree node."""
        data = node.to_dict()
        data.update({
            "question": self.question,
            "IR_answer": self.ir_answer.to_dict() if self.ir_answer is not None else None,
            "child_answer": self.child_answer.to_dict() if self.child_answer is not None else None,
            "answer": self.final_answer.to_dict(),
            "facts": list(self.facts),
            "fact_ids": list(self.retrieved_fact_ids),
            "llm_calls": self.llm_calls,
            "seq": self.seq,
            "constraint_violation": self.constraint_violation,
        })
        return data


@dataclass
class TreeSolution:
    tree: object
    traces: dict
    predictions: list = field(default_factory=list)

    @property
    def root_trace(self):
        return self.traces[self.tree.root_idx]

    @property
    def answer(self):
        return self.root_trace.final_answer

    @property
    def api_calls(self):
        return self.tree.decompose_calls + sum(t.llm_calls for t in self.traces.values())

    def to_dict(self, question_id=None):
        return {
            "question_id": question_id,
            "question": self.tree.root.question_text,
            "answer": self.answer.render(),
            "predictions": [p.to_dict() for p in self.predictions],
            "api_calls": self.api_calls,
            "tree": {
                "root_idx": self.tree.root_idx,
                "decompose_calls": self.tree.decompose_calls,
                "nodes": [self.traces[n.idx].to_dict(n) for n in self.tree.nodes],
            },
        }


class _CountingGateway:
    """Counts the calls one node makes through the shared gateway."""

    def __init__(self, gateway):
        self.gateway = gateway
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        return self.gateway.complete(request)


def replace_placeholders(question, prior_answers):
    """
    Substitutes every ``#j`` token with the rendered answer of sibling j.

    :param question: Sub-question text.
    :type question: str
    :param prior_answers: Answers of the earlier siblings, keyed by 1-based position.
    :type prior_answers: dict[int, :class:`Answer`]
    :rtype: str
    :raises MissingPlaceholderAnswer: a referenced sibling has no answer.
    """
    def _substitute(match):
        j = int(match.group(1))
        if j not in prior_answers:
            raise MissingPlaceholderAnswer(j)
        return prior_answers[j].render()

    return PLACEHOLDER_RE.sub(_substitute, question)


def reason(question, facts, template_id, gateway, model_id=DEFAULT_MODEL, temperature=0.0, tag=None,
           context_cap=DEFAULT_TOP_K, registry=DEFAULT_PROMPTS):
    """
    Answers a question from a list of facts with one LLM call.

    The answer is read after the final "So the answer is:" in the reply;
    the full reply is kept as the reasoning chain. Service failures give
    an Error answer instead of raising.

    :param question: Question with placeholders already substituted.
    :type question: str
    :param facts: Statements (or entity-time strings for the relevant-facts prompt).
    :type facts: list[:class:`src.core.verbalizer.VerbalizedFact`] or list[str]
    :param template_id: Solver prompt to use.
    :type template_id: str
    :rtype: :class:`src.reasoning.answer.Answer`
    """
    template = registry.get(template_id)
    context = [f.text if isinstance(f, VerbalizedFact) else str(f) for f in facts][:context_cap]
    request = LlmRequest(
        system_instruction=template.system_role,
        user_content=render_prompt(template, question, context),
        temperature=temperature,
        model_id=model_id,
        template_id=template_id,
        tag=tag,
    )
    try:
        response = gateway.complete(request)
    except LlmServiceError as exc:
        logger.warning(f"Reasoning failed for {question!r}: {exc}")
        return Answer.error(str(exc))
    return extract_answer(response.text)


def summarize(question, child_answers, gateway, model_id=DEFAULT_MODEL, temperature=0.0, tag=None,
              registry=DEFAULT_PROMPTS):
    """
    Derives a node's child answer from its solved sub-questions.

    The last sub-question resolves the node when its answer is valid;
    otherwise the relevant-facts prompt picks among the valid answers, and
    with no valid answer at all the result is Unknown.

    :rtype: :class:`src.reasoning.answer.Answer`
    """
    if not child_answers:
        raise ValueError("summarize needs at least one child answer")
    last = child_answers[-1]
    if last.is_valid:
        return last.with_source(AnswerSource.CHILD)
    valid = [a for a in child_answers if a.is_valid]
    if not valid:
        return Answer.unknown(source=AnswerSource.CHILD)
    items = []
    for answer in valid:
        items.extend(answer.list_items() or [answer.render()])
    answer = reason(question, items, SOLVE_RELEVANT, gateway, model_id, temperature, tag, registry=registry)
    return answer.with_source(AnswerSource.CHILD)


def check_constraints(question, answer):
    """
    Flags answer times that break an explicit "before/after <date>" in the question.

    :return: A description of the violation, or None.
    :rtype: str or None
    """
    match = CONSTRAINT_RE.search(question)
    if match is None or not answer.is_valid:
        return None
    expected = Ordering.BEFORE if match.group(1).lower() == "before" else Ordering.AFTER
    bound = parse_timestamp(match.group(2))
    if answer.kind is AnswerKind.TIMESTAMP:
        stamps = [answer.value]
    elif answer.kind is AnswerKind.ENTITY_TIME_LIST:
        stamps = [stamp for _, stamp in answer.value]
    else:
        return None
    offending = sorted({s.render() for s in stamps if compare_timestamps(s, bound) is not expected})
    if not offending:
        return None
    return f"not {expected.value.lower()} {bound.render()}: {', '.join(offending)}"


class RecursiveSolver:
    """
    Solves :class:`src.reasoning.tree.QueryTree` objects bottom-up.

    :param retriever: Fact retriever; may be None when retrieval is disabled.
    :type retriever: :class:`src.core.retriever.FactRetriever`
    :param gateway: Shared LLM gateway.
    :type gateway: :class:`src.llm.gateway.LlmGateway`
    :param config: Solver settings.
    :type config: :class:`SolverConfig`
    """

    def __init__(self, retriever, gateway, config=None, registry=DEFAULT_PROMPTS):
        self.config = config or SolverConfig()
        if self.config.use_retrieval and retriever is None:
            raise ValueError("a retriever is required unless use_retrieval is off")
        self.retriever = retriever
        self.gateway = gateway
        self.registry = registry

    def solve_tree(self, tree, tag=None):
        """
        Solves every node of ``tree`` and ranks the root's predictions.

        :param tag: Question id for call accounting.
        :type tag: str, optional
        :rtype: :class:`TreeSolution`
        """
        if tree.depth() > self.config.max_depth:
            raise DepthExceeded(f"tree depth {tree.depth()} exceeds the cap of {self.config.max_depth}")
        traces = {}
        self.solve(tree.root, tree, tag=tag, traces=traces)
        solution = TreeSolution(tree, {idx: traces[idx] for idx in sorted(traces)})
        solution.predictions = self.rank_predictions(solution.root_trace)
        return solution

    def solve(self, node, tree, question=None, tag=None, traces=None, previous_answer=None, depth=0):
        """
        Solves one node and, recursively, its sub-questions.

        :param question: Node text with placeholders substituted; defaults to the node text.
        :param previous_answer: Answer of the preceding sibling, if any.
        :param traces: Collects the trace of every solved node by index.
        :rtype: :class:`SolveTrace`
        """
        if depth > self.config.max_depth:
            raise DepthExceeded(f"recursion passed depth {self.config.max_depth} at node {node.idx}")
        traces = traces if traces is not None else {}
        question = standardize_time(question or node.question_text)
        calls = _CountingGateway(self.gateway)

        if not node.sons:
            if self._is_selection(node, question, previous_answer):
                facts, fact_ids = previous_answer.list_items(), []
                answer = self._reason(question, facts, SOLVE_RELEVANT, calls, tag)
            else:
                fact_ids, facts = self._retrieve(question)
                answer = self._reason(question, facts, SOLVE_HISTORICAL, calls, tag)
            trace = SolveTrace(node.idx, question, fact_ids, facts, answer, None, answer, calls.calls, len(traces))
        else:
            sibling_answers = {}
            previous = None
            for position, son_idx in enumerate(node.sons, start=1):
                son = tree.node(son_idx)
                son_question = replace_placeholders(son.question_text, sibling_answers)
                son_trace = self.solve(son, tree, son_question, tag, traces, previous, depth + 1)
                sibling_answers[position] = son_trace.final_answer
                previous = son_trace.final_answer

            child_answer = summarize(
                question, list(sibling_answers.values()), calls, self.config.reason_model,
                self.config.temperature, tag, self.registry,
            )
            if self.config.use_multi_answer:
                fact_ids, facts = self._retrieve(question)
                ir_answer = self._reason(question, facts, SOLVE_HISTORICAL, calls, tag)
                final = aggregate(
                    CandidateSet.of(ir_answer, child_answer), question, calls, self.config.aggregation_mode,
                    self.config.aggregate_model, self.config.temperature, tag, self.registry,
                )
            else:
                fact_ids, facts, ir_answer = [], [], None
                final = child_answer
            trace = SolveTrace(node.idx, question, fact_ids, facts, ir_answer, child_answer, final,
                               calls.calls, len(traces))

        if self.config.verify_constraints:
            trace.constraint_violation = check_constraints(question, trace.final_answer)
            if trace.constraint_violation:
                logger.info(f"Node {node.idx} answer flagged, {trace.constraint_violation}")
        traces[node.idx] = trace
        return trace

    def _is_selection(self, node, question, previous_answer):
        return (
            previous_answer is not None
            and previous_answer.kind is AnswerKind.ENTITY_TIME_LIST
            and not PLACEHOLDER_RE.search(node.question_text)
            and SELECTION_CUE_RE.search(question) is not None
        )

    def _retrieve(self, question):
        if not self.config.use_retrieval:
            return [], []
        results, texts = self.retriever.search(question, self.config.top_k)
        return [r.fact_id for r in results], texts

    def _reason(self, question, facts, template_id, gateway, tag):
        return reason(
            question, facts, template_id, gateway, self.config.reason_model, self.config.temperature,
            tag, self.config.top_k, self.registry,
        )

    def rank_predictions(self, root_trace, limit=HITS_DEPTH):
        """
        Ranks answers for Hits@k: the final answer, then the other valid
        candidates, then distinct entities (or, for time answers, distinct
        times at the answer's granularity) from the root's retrieved facts.

        :rtype: list[:class:`src.reasoning.answer.Answer`]
        """
        ranked, seen = [], set()

        def _push(answer):
            key = " ".join(answer.render().lower().split())
            if key not in seen and len(ranked) < limit:
                seen.add(key)
                ranked.append(answer)

        ranked.append(root_trace.final_answer)
        seen.add(" ".join(root_trace.final_answer.render().lower().split()))
        for candidate in (root_trace.ir_answer, root_trace.child_answer):
            if candidate is not None and candidate.is_valid:
                _push(candidate)

        if self.retriever is None:
            return ranked
        wants_time = root_trace.final_answer.kind is AnswerKind.TIMESTAMP
        question = root_trace.question.lower()
        for fact_id in root_trace.retrieved_fact_ids:
            fact = self.retriever.store.get_fact(fact_id)
            if wants_time:
                stamp = fact.time or fact.start
                stamp = stamp.truncate(root_trace.final_answer.value.granularity)
                _push(Answer(AnswerKind.TIMESTAMP, stamp, AnswerSource.IR))
            else:
                for entity in (fact.subject, fact.object):
                    if entity.lower() not in question:
                        _push(Answer(AnswerKind.ENTITY, entity, AnswerSource.IR))
        return ranked


def solve(node, tree, retriever, gateway, config=None, tag=None):
    """Solves ``node`` of ``tree`` with a fresh :class:`RecursiveSolver` and returns its trace."""
    return RecursiveSolver(retriever, gateway, config).solve(node, tree, tag=tag)
