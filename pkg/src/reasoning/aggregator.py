"""
Final answer selection among candidate sources.

Source A is the node's direct retrieval answer, B the answer derived from
its sub-questions and C an optional third source. The later source wins
whenever it is valid.
"""

from dataclasses import dataclass
from enum import Enum

from ..core.errors import LlmServiceError
from ..core.log_utils import get_logger
from ..llm.gateway import DEFAULT_MODEL, LlmRequest
from ..llm.prompts import AGGREGATE, DEFAULT_PROMPTS, render_prompt
from .answer import Answer, AnswerSource, extract_answer

logger = get_logger(__name__)


class AggregationMode(Enum):
    RULES = "rules"
    LLM_ASSISTED = "llm"


class SourceLabel(Enum):
    A = "A"
    B = "B"
    C = "C"


_LABEL_ORDER = (SourceLabel.A, SourceLabel.B, SourceLabel.C)


@dataclass(frozen=True)
class CandidateSet:
    """Two or three labelled candidate answers, in label order A, B[, C]."""

    sources: tuple

    def __post_init__(self):
        sources = tuple(self.sources)
        labels = tuple(label for label, _ in sources)
        if labels not in (_LABEL_ORDER[:2], _LABEL_ORDER):
            raise ValueError(f"candidate labels must be A, B or A, B, C; got {[l.value for l in labels]}")
        object.__setattr__(self, "sources", sources)

    @classmethod
    def of(cls, ir_answer, child_answer, third=None):
        sources = [(SourceLabel.A, ir_answer), (SourceLabel.B, child_answer)]
        if third is not None:
            sources.append((SourceLabel.C, third))
        return cls(tuple(sources))

    def answers(self):
        return [answer for _, answer in self.sources]


def select_by_precedence(candidates):
    """Returns the highest-priority valid candidate, or Unknown when none is valid."""
    for _, answer in reversed(candidates.sources):
        if answer.is_valid:
            return answer.with_source(AnswerSource.AGGREGATED)
    return Answer.unknown(source=AnswerSource.AGGREGATED)


def _normalized(text):
    return " ".join(text.lower().split())


def aggregate(candidates, question, gateway=None, mode=AggregationMode.RULES, model_id=DEFAULT_MODEL,
              temperature=0.0, tag=None, registry=DEFAULT_PROMPTS):
    """
    Selects the final answer of a node.

    In rules mode the latest valid source wins (C, then B, then A). In
    LLM-assisted mode the aggregation prompt is sent and its pick is used
    when it is one of the candidates; any failure falls back to the rules.

    :param candidates: Labelled candidates.
    :type candidates: :class:`CandidateSet`
    :param question: Node question, used by the aggregation prompt.
    :type question: str
    :param mode: Rules or LLM-assisted.
    :type mode: :class:`AggregationMode` or str
    :return: Selected answer, with source Aggregated.
    :rtype: :class:`src.reasoning.answer.Answer`
    """
    mode = AggregationMode(mode)
    if mode is AggregationMode.RULES or gateway is None:
        return select_by_precedence(candidates)

    template = registry.get(AGGREGATE)
    lines = [f"source {label.value}: {answer.render()}" for label, answer in candidates.sources]
    request = LlmRequest(
        system_instruction=template.system_role,
        user_content=render_prompt(template, question, lines),
        temperature=temperature,
        model_id=model_id,
        template_id=AGGREGATE,
        tag=tag,
    )
    try:
        response = gateway.complete(request)
    except LlmServiceError as exc:
        logger.warning(f"Aggregation call failed ({exc}); using precedence rules")
        return select_by_precedence(candidates)

    picked = extract_answer(response.text, source=AnswerSource.AGGREGATED)
    if picked.is_valid:
        for _, answer in candidates.sources:
            if answer.is_valid and _normalized(answer.render()) == _normalized(picked.render()):
                return Answer(answer.kind, answer.value, AnswerSource.AGGREGATED, response.text)
    logger.debug(f"Aggregation reply {picked.render()!r} is not a valid candidate; using precedence rules")
    return select_by_precedence(candidates)
