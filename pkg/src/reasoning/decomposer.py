"""
Question classification and LLM-driven decomposition.

A question is classified, the matching few-shot decomposition prompt is
rendered, and the JSON reply is parsed into a :class:`QueryTree` whose
root is the time-standardized question.
"""

import json
import re
import warnings

from ..core.errors import MalformedDecomposition, MalformedResponse
from ..core.log_utils import get_logger
from ..llm.gateway import DEFAULT_MODEL, LlmRequest
from ..llm.prompts import DECOMPOSE_MULTIPLE, DECOMPOSE_SIMPLE, DEFAULT_PROMPTS, render_prompt
from .time_standardizer import standardize_time
from .tree import DEFAULT_MAX_DEPTH, QueryTree, QuestionCategory, QuestionType, tree_from_struct

logger = get_logger(__name__)

DATASET_LABELS = {
    "equal": QuestionCategory.EQUAL,
    "before_after": QuestionCategory.BEFORE_AFTER,
    "first_last": QuestionCategory.FIRST_LAST,
    "equal_multi": QuestionCategory.EQUAL_MULTI,
    "before_last": QuestionCategory.BEFORE_LAST,
    "after_first": QuestionCategory.AFTER_FIRST,
    "simple": QuestionCategory.TIMELINE_SIMPLE,
    "medium": QuestionCategory.TIMELINE_MEDIUM,
    "complex": QuestionCategory.TIMELINE_COMPLEX,
}
DATASET_LABELS.update({c.value.lower(): c for c in QuestionCategory})

CATEGORY_TEMPLATES = {
    QuestionCategory.EQUAL: DECOMPOSE_SIMPLE,
    QuestionCategory.FIRST_LAST: DECOMPOSE_SIMPLE,
    QuestionCategory.TIMELINE_SIMPLE: DECOMPOSE_SIMPLE,
    QuestionCategory.BEFORE_AFTER: DECOMPOSE_MULTIPLE,
    QuestionCategory.EQUAL_MULTI: DECOMPOSE_MULTIPLE,
    QuestionCategory.BEFORE_LAST: DECOMPOSE_MULTIPLE,
    QuestionCategory.AFTER_FIRST: DECOMPOSE_MULTIPLE,
    QuestionCategory.TIMELINE_MEDIUM: DECOMPOSE_MULTIPLE,
    QuestionCategory.TIMELINE_COMPLEX: DECOMPOSE_MULTIPLE,
}

_ORDER_RE = re.compile(r"\b(before|after|prior to|following)\b", re.IGNORECASE)
_EXTREME_RE = re.compile(r"\b(first|last|earliest|latest|final)\b", re.IGNORECASE)
_SAME_RE = re.compile(r"\bsame (day|month|year)\b", re.IGNORECASE)
_FENCE_RE = re.compile(r"^```(?:json)?\s*|\s*```$")


def classify_question(question, dataset_hint=None):
    """
    Determines the question type.

    A dataset label (``equal``, ``before_after``, ``first_last``,
    ``equal_multi``, ``before_last``, ``after_first``, ``simple``,
    ``medium``, ``complex``, case-insensitive) wins over the text. Without
    one, keywords decide: an ordering word and an extreme word together give
    BeforeLast or AfterFirst, either alone gives BeforeAfter or FirstLast,
    "same day/month/year" gives EqualMulti and everything else is Equal.

    :param question: Question text.
    :type question: str
    :param dataset_hint: Label from the dataset file.
    :type dataset_hint: str or :class:`QuestionType`, optional
    :rtype: :class:`QuestionType`
    """
    if isinstance(dataset_hint, QuestionType):
        return dataset_hint
    if dataset_hint is not None and str(dataset_hint).strip():
        category = DATASET_LABELS.get(str(dataset_hint).strip().lower())
        if category is not None:
            return QuestionType.from_category(category)
        warnings.warn(f"Unknown question type label {dataset_hint!r}; classifying from the question text")

    order = _ORDER_RE.search(question)
    extreme = _EXTREME_RE.search(question)
    if order and extreme:
        before = order.group(1).lower() in ("before", "prior to")
        return QuestionType.from_category(QuestionCategory.BEFORE_LAST if before else QuestionCategory.AFTER_FIRST)
    if _SAME_RE.search(question):
        return QuestionType.from_category(QuestionCategory.EQUAL_MULTI)
    if order:
        return QuestionType.from_category(QuestionCategory.BEFORE_AFTER)
    if extreme:
        return QuestionType.from_category(QuestionCategory.FIRST_LAST)
    return QuestionType.from_category(QuestionCategory.EQUAL)


def template_for(qtype):
    return CATEGORY_TEMPLATES[qtype.category]


def _check_children(children):
    if not isinstance(children, list):
        raise MalformedDecomposition(f"sub-questions must be a list, got {type(children).__name__}")
    for child in children:
        if isinstance(child, str):
            continue
        if isinstance(child, dict) and len(child) == 1:
            _check_children(next(iter(child.values())))
            continue
        raise MalformedDecomposition(f"invalid sub-question entry {child!r}")


def parse_struct(text):
    """
    Parses a decomposition reply.

    The reply must be a JSON object with exactly one key (the parent
    question) whose value is the ordered list of sub-questions; nested
    single-key objects describe deeper levels. Markdown code fences are
    ignored.

    :return: The parent question and its sub-questions.
    :rtype: (str, list)
    :raises MalformedDecomposition: anything else.
    """
    cleaned = _FENCE_RE.sub("", (text or "").strip())
    try:
        data = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise MalformedDecomposition(f"decomposition is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or len(data) != 1:
        raise MalformedDecomposition("decomposition must be an object with exactly one top-level key")
    parent, children = next(iter(data.items()))
    _check_children(children)
    return parent, children


class Decomposer:
    """Builds question trees through an :class:`src.llm.gateway.LlmGateway`."""

    def __init__(self, gateway, model_id=DEFAULT_MODEL, temperature=0.0, max_depth=DEFAULT_MAX_DEPTH,
                 registry=DEFAULT_PROMPTS, strict=False, use_decomposition=True):
        self.gateway = gateway
        self.model_id = model_id
        self.temperature = temperature
        self.max_depth = max_depth
        self.registry = registry
        self.strict = strict
        self.use_decomposition = use_decomposition

    def build_request(self, question, qtype, tag=None):
        template = self.registry.get(template_for(qtype))
        return LlmRequest(
            system_instruction=template.system_role,
            user_content=render_prompt(template, question),
            temperature=self.temperature,
            model_id=self.model_id,
            template_id=template.template_id,
            tag=tag,
        )

    def decompose(self, question, qtype, tag=None, gold_answer=None):
        """
        Decomposes one question.

        :param question: Original question text.
        :type question: str
        :param qtype: Question type from :func:`classify_question`.
        :type qtype: :class:`QuestionType`
        :param tag: Question id for call accounting.
        :type tag: str, optional
        :param gold_answer: Gold answer attached to the root.
        :type gold_answer: str, optional
        :rtype: :class:`QueryTree`
        :raises PlaceholderViolation: a sub-question refers forward or to itself.
        :raises DepthExceeded: the reply nests deeper than ``max_depth``.
        :raises MalformedDecomposition: unparseable reply in strict mode.
        """
        text = standardize_time(question)
        if not self.use_decomposition:
            return QueryTree.leaf_only(text, qtype, gold_answer)

        request = self.build_request(text, qtype, tag)
        calls_before = self.gateway.calls_for(tag)
        try:
            (parent, children), _ = self.gateway.complete_json(request, parse_struct)
        except MalformedResponse as exc:
            if self.strict:
                raise MalformedDecomposition(f"could not decompose {text!r}: {exc}") from exc
            logger.warning(f"Falling back to direct retrieval for {text!r}: {exc}")
            children = []
        else:
            if parent.strip() != text:
                logger.debug(f"Decomposition key {parent!r} differs from the question; keeping the question")

        tree = tree_from_struct(text, children, qlabel=qtype, gold_answer=gold_answer)
        tree.decompose_calls = self.gateway.calls_for(tag) - calls_before
        return tree.validate(self.max_depth)


def decompose(question, qtype, gateway, **kwargs):
    """Shorthand for ``Decomposer(gateway, **options).decompose(question, qtype)``."""
    call_options = {k: kwargs.pop(k) for k in ("tag", "gold_answer") if k in kwargs}
    return Decomposer(gateway, **kwargs).decompose(question, qtype, **call_options)
