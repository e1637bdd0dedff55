"""
Evaluation metrics: answer matching, Hits@k, Recall@n and tree statistics.
"""

import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd

from ..core.errors import EmptyRecordSet, UndefinedRecall
from ..core.log_utils import get_logger
from ..core.retriever import retrieve
from ..core.timestamp import Granularity, is_timestamp, parse_timestamp
from ..reasoning.answer import Answer, AnswerKind
from ..reasoning.decomposer import classify_question
from ..reasoning.tree import QueryTree, QuestionType

logger = get_logger(__name__)

DEFAULT_RECALL_NS = (10, 20, 30, 40, 50, 60)
_BRACKETS_RE = re.compile(r"[\[\]]")


class AnswerType(Enum):
    ENTITY = "Entity"
    TIME = "Time"


def normalize_answer(text):
    """Case-folds and collapses whitespace; brackets and a trailing period are dropped."""
    normalized = " ".join(_BRACKETS_RE.sub(" ", str(text)).casefold().split())
    if normalized.endswith("."):
        normalized = normalized[:-1].rstrip()
    return normalized


def _match_timestamp(stamp, gold_text):
    gold_text = gold_text.strip()
    if not is_timestamp(gold_text):
        return normalize_answer(stamp.render()) == normalize_answer(gold_text)
    gold_stamp = parse_timestamp(gold_text)
    coarse = min(stamp.granularity, gold_stamp.granularity, key=lambda g: g.value)
    return stamp.truncate(coarse) == gold_stamp.truncate(coarse)


def match_answer(prediction, gold):
    """
    Decides whether a prediction answers the question.

    Entities match after normalization; an entity-time list matches when
    any listed entity does; timestamps match when equal after truncating
    both sides to the coarser granularity.

    :param prediction: Predicted answer.
    :type prediction: :class:`src.reasoning.answer.Answer`
    :param gold: Acceptable answer strings.
    :type gold: list[str]
    :rtype: bool
    """
    if not prediction.is_valid:
        return False
    gold = [g for g in gold if isinstance(g, str) and g.strip()]
    if prediction.kind is AnswerKind.TIMESTAMP:
        return any(_match_timestamp(prediction.value, g) for g in gold)
    wanted = {normalize_answer(g) for g in gold}
    return any(normalize_answer(entity) in wanted for entity in prediction.entities())


@dataclass
class EvalRecord:
    question_id: str
    qtype: QuestionType
    answer_type: AnswerType
    time_granularity: Optional[Granularity]
    predictions: list
    gold: list
    hit1: bool
    hit10: bool
    api_calls: int
    tree_depth: int
    tree_branch: float

    def __post_init__(self):
        if self.hit1 and not self.hit10:
            raise ValueError(f"record {self.question_id}: a Hits@1 hit must also be a Hits@10 hit")


def _hit(predictions, gold, k):
    return any(match_answer(p, gold) for p in predictions[:k])


def _answer_type(dataset_row, gold):
    label = str(dataset_row.get("answer_type") or "").strip().lower()
    if label in ("time", "timestamp", "date"):
        return AnswerType.TIME
    if label == "entity":
        return AnswerType.ENTITY
    return AnswerType.TIME if gold and all(is_timestamp(g) for g in gold) else AnswerType.ENTITY


def _granularity(dataset_row, gold, answer_type):
    label = str(dataset_row.get("time_level") or "").strip().lower()
    for granularity in Granularity:
        if label == granularity.name.lower():
            return granularity
    if answer_type is AnswerType.TIME:
        stamps = [parse_timestamp(g) for g in gold if is_timestamp(g)]
        if stamps:
            return stamps[0].granularity
    return None


def build_record(solved_row, dataset_row):
    """
    Joins one solved question with its dataset entry.

    :param solved_row: One line of the solve stage output.
    :type solved_row: dict
    :param dataset_row: The matching dataset line.
    :type dataset_row: dict
    :rtype: :class:`EvalRecord`
    """
    gold = [str(g) for g in dataset_row.get("answers", [])]
    predictions = [Answer.from_dict(p) for p in solved_row.get("predictions", [])]
    tree = QueryTree.from_dict(solved_row["tree"])
    qtype = tree.root.qlabel or classify_question(dataset_row["question"], dataset_row.get("qtype"))
    answer_type = _answer_type(dataset_row, gold)
    return EvalRecord(
        question_id=str(dataset_row["question_id"]),
        qtype=qtype,
        answer_type=answer_type,
        time_granularity=_granularity(dataset_row, gold, answer_type),
        predictions=predictions,
        gold=gold,
        hit1=_hit(predictions, gold, 1),
        hit10=_hit(predictions, gold, 10),
        api_calls=int(solved_row.get("api_calls", 0)),
        tree_depth=tree.depth(),
        tree_branch=tree.branch(),
    )


def hits_at_k(records, k):
    """
    Fraction of records with a matching answer among the top-k predictions.

    :raises EmptyRecordSet: no records.
    """
    if not records:
        raise EmptyRecordSet("Hits@k needs at least one record")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return float(np.mean([_hit(r.predictions, r.gold, k) for r in records]))


def recall_at_n(question, retrieved, gold_fact_ids):
    """
    Share of the gold facts found in ``retrieved``.

    :param question: Question text, for error messages.
    :param retrieved: Top-n retrieval results.
    :type retrieved: list[:class:`src.core.retriever.RetrievalResult`]
    :param gold_fact_ids: Annotated supporting facts.
    :type gold_fact_ids: set[int]
    :rtype: float
    :raises UndefinedRecall: no gold facts.
    """
    gold = {int(f) for f in gold_fact_ids}
    if not gold:
        raise UndefinedRecall(f"no gold facts annotated for {question!r}")
    found = {r.fact_id for r in retrieved} & gold
    return len(found) / len(gold)


@dataclass
class RecallCurve:
    ns: tuple
    per_question: dict = field(default_factory=dict)
    excluded: int = 0

    @property
    def points(self):
        """Mean recall per n; empty when no question had gold facts."""
        if not self.per_question:
            return {}
        matrix = np.array(list(self.per_question.values()), dtype=np.float64)
        return {n: float(value) for n, value in zip(self.ns, matrix.mean(axis=0))}

    def to_dict(self):
        return {
            "ns": list(self.ns),
            "recall": {str(n): v for n, v in self.points.items()},
            "evaluated": len(self.per_question),
            "excluded": self.excluded,
        }


def recall_curve(questions, index, ns=DEFAULT_RECALL_NS):
    """
    Recall@n for every n, from a single retrieval at the largest n.

    :param questions: ``(question_id, question, gold_fact_ids)`` triples.
    :param index: Index the questions are retrieved against.
    :type index: :class:`src.core.retriever.VectorIndex`
    :rtype: :class:`RecallCurve`
    """
    ns = tuple(sorted(int(n) for n in ns))
    curve = RecallCurve(ns)
    for question_id, question, gold in questions:
        if not gold:
            curve.excluded += 1
            continue
        results = retrieve(question, index, ns[-1])
        curve.per_question[question_id] = [recall_at_n(question, results[:n], gold) for n in ns]
    if curve.excluded:
        logger.info(f"{curve.excluded} question(s) without gold facts excluded from Recall@n")
    return curve


@dataclass(frozen=True)
class TreeStats:
    avg_depth: float
    avg_branch: float
    avg_api_calls: float


def tree_stats(solutions):
    """
    Averages depth, branch and API calls over solved trees.

    :param solutions: Objects with ``tree`` and ``api_calls`` attributes
        (e.g. :class:`src.reasoning.solver.TreeSolution`), or
        ``(QueryTree, api_calls)`` pairs.
    :rtype: :class:`TreeStats`
    :raises EmptyRecordSet: nothing to average.
    """
    rows = []
    for item in solutions:
        tree, calls = (item.tree, item.api_calls) if hasattr(item, "tree") else item
        rows.append((tree.depth(), tree.branch(), calls))
    if not rows:
        raise EmptyRecordSet("tree statistics need at least one tree")
    depth, branch, calls = np.array(rows, dtype=np.float64).mean(axis=0)
    return TreeStats(float(depth), float(branch), float(calls))


def records_frame(records):
    """One row per record, with the grouping columns used by the reports."""
    return pd.DataFrame([
        {
            "question_id": r.question_id,
            "category": r.qtype.category.value,
            "complexity": r.qtype.complexity.value,
            "answer_type": r.answer_type.value,
            "granularity": r.time_granularity.label if r.time_granularity else None,
            "hit1": bool(r.hit1),
            "hit10": bool(r.hit10),
            "api_calls": r.api_calls,
            "depth": r.tree_depth,
            "branch": r.tree_branch,
        }
        for r in records
    ])


def breakdown(frame, column):
    """Count, Hits@1 and Hits@10 per value of ``column``; rows without a value are skipped."""
    grouped = frame.dropna(subset=[column]).groupby(column, sort=True)
    return grouped.agg(count=("hit1", "size"), hits1=("hit1", "mean"), hits10=("hit10", "mean"))


@dataclass
class EvalSummary:
    count: int
    hits1: float
    hits10: float
    by_category: dict
    by_complexity: dict
    by_answer_type: dict
    by_granularity: dict
    avg_depth: Optional[float]
    avg_branch: Optional[float]
    avg_api_calls: Optional[float]
    recall: Optional[dict] = None

    def to_dict(self):
        return asdict(self)


def summarize_records(records, curve=None):
    """
    Builds the evaluation summary.

    :type records: list[:class:`EvalRecord`]
    :param curve: Optional Recall@n curve to attach.
    :type curve: :class:`RecallCurve`
    :rtype: :class:`EvalSummary`
    :raises EmptyRecordSet: no records.
    """
    if not records:
        raise EmptyRecordSet("nothing to evaluate: the solve output is empty")
    frame = records_frame(records)

    def _table(column):
        table = breakdown(frame, column)
        return {
            str(key): {"count": int(row["count"]), "hits1": float(row["hits1"]), "hits10": float(row["hits10"])}
            for key, row in table.iterrows()
        }

    return EvalSummary(
        count=len(records),
        hits1=hits_at_k(records, 1),
        hits10=hits_at_k(records, 10),
        by_category=_table("category"),
        by_complexity=_table("complexity"),
        by_answer_type=_table("answer_type"),
        by_granularity=_table("granularity"),
        avg_depth=float(frame["depth"].mean()),
        avg_branch=float(frame["branch"].mean()),
        avg_api_calls=float(frame["api_calls"].mean()),
        recall=curve.to_dict() if curve is not None else None,
    )
