"""
Answers produced by reasoning and aggregation.

An :class:`Answer` is a tagged value: an entity string, a timestamp, a
list of (entity, timestamp) pairs, or one of the two invalid markers
Unknown and Error. It remembers where it came from and the full
reasoning text behind it.
"""

import re
from dataclasses import dataclass, replace
from enum import Enum

from ..core.errors import MalformedTimestamp
from ..core.timestamp import TimeStamp, is_timestamp, parse_timestamp

ANSWER_ANCHOR = "So the answer is:"

_ISO = r"[0-9]{4}(?:-[0-9]{2}(?:-[0-9]{2})?)?"
PAIR_RE = re.compile(rf"\[\s*([^\[\]]+?)\s+({_ISO})\s*\]")
BARE_PAIR_RE = re.compile(rf"^(.*\S)\s+(?:in\s+|on\s+)?({_ISO})$")
INVALID_LITERALS = {"unknown", "error"}


class AnswerKind(Enum):
    ENTITY = "Entity"
    TIMESTAMP = "Timestamp"
    ENTITY_TIME_LIST = "EntityTimeList"
    UNKNOWN = "Unknown"
    ERROR = "Error"


class AnswerSource(Enum):
    IR = "IR"
    CHILD = "Child"
    AGGREGATED = "Aggregated"


@dataclass(frozen=True)
class Answer:
    """
    One answer value with provenance.

    ``value`` is a ``str`` for entities, a :class:`TimeStamp` for
    timestamps, a tuple of ``(entity, TimeStamp)`` pairs for entity-time
    lists, and ``None`` for Unknown and Error.
    """

    kind: AnswerKind
    value: object = None
    source: AnswerSource = AnswerSource.IR
    chain: str = ""

    def __post_init__(self):
        if self.kind in (AnswerKind.UNKNOWN, AnswerKind.ERROR):
            if self.value is not None:
                raise ValueError(f"{self.kind.value} answers carry no value")
        elif self.kind is AnswerKind.TIMESTAMP:
            if not isinstance(self.value, TimeStamp):
                raise ValueError("timestamp answers need a TimeStamp value")
        elif self.kind is AnswerKind.ENTITY_TIME_LIST:
            pairs = tuple(self.value or ())
            if not pairs:
                raise ValueError("entity-time lists need at least one pair")
            for entity, stamp in pairs:
                if not isinstance(entity, str) or not entity.strip() or not isinstance(stamp, TimeStamp):
                    raise ValueError(f"invalid entity-time pair {(entity, stamp)!r}")
            object.__setattr__(self, "value", pairs)
        elif not isinstance(self.value, str) or not self.value.strip():
            raise ValueError("entity answers need a non-empty string")

    @classmethod
    def unknown(cls, chain="", source=AnswerSource.IR):
        return cls(AnswerKind.UNKNOWN, None, source, chain)

    @classmethod
    def error(cls, chain="", source=AnswerSource.IR):
        return cls(AnswerKind.ERROR, None, source, chain)

    @property
    def is_valid(self):
        """False for Unknown/Error, and for entity values that spell out "unknown" or "error"."""
        if self.kind in (AnswerKind.UNKNOWN, AnswerKind.ERROR):
            return False
        if self.kind is AnswerKind.ENTITY:
            return self.value.strip().lower() not in INVALID_LITERALS
        return True

    def render(self):
        """
        Renders the answer value as text.

        Timestamps use the ISO prefix form and entity-time lists the
        bracketed form ``[Entity yyyy-mm-dd], [Entity yyyy-mm-dd]``.
        """
        if self.kind is AnswerKind.ENTITY:
            return self.value
        if self.kind is AnswerKind.TIMESTAMP:
            return self.value.render()
        if self.kind is AnswerKind.ENTITY_TIME_LIST:
            return ", ".join(f"[{entity} {stamp.render()}]" for entity, stamp in self.value)
        return self.kind.value

    def entities(self):
        if self.kind is AnswerKind.ENTITY:
            return [self.value]
        if self.kind is AnswerKind.ENTITY_TIME_LIST:
            return [entity for entity, _ in self.value]
        return []

    def list_items(self):
        """Entity-time pairs as ``"Entity yyyy-mm-dd"`` strings, for the relevant-facts prompt."""
        if self.kind is not AnswerKind.ENTITY_TIME_LIST:
            return []
        return [f"{entity} {stamp.render()}" for entity, stamp in self.value]

    def with_source(self, source):
        return replace(self, source=source)

    def to_dict(self):
        data = {"kind": self.kind.value, "source": self.source.value, "value": None, "chain": self.chain}
        if self.kind is AnswerKind.ENTITY:
            data["value"] = self.value
        elif self.kind is AnswerKind.TIMESTAMP:
            data["value"] = self.value.render()
        elif self.kind is AnswerKind.ENTITY_TIME_LIST:
            data["value"] = [[entity, stamp.render()] for entity, stamp in self.value]
        return data

    @classmethod
    def from_dict(cls, data):
        kind = AnswerKind(data["kind"])
        value = data.get("value")
        if kind is AnswerKind.TIMESTAMP:
            value = parse_timestamp(value)
        elif kind is AnswerKind.ENTITY_TIME_LIST:
            value = tuple((entity, parse_timestamp(stamp)) for entity, stamp in value)
        return cls(kind, value, AnswerSource(data.get("source", "IR")), data.get("chain", ""))

    def __str__(self):
        return self.render()


def _clean(text):
    text = text.strip().strip("*`\"'").strip()
    if text.endswith("."):
        text = text[:-1].rstrip()
    return text


def parse_answer_text(text, source=AnswerSource.IR, chain=""):
    """
    Infers an :class:`Answer` from the shape of an answer string.

    ISO timestamps become Timestamp answers; one or more bracketed
    ``[Entity yyyy-mm-dd]`` pairs (or a single bare ``Entity yyyy-mm-dd``)
    become an EntityTimeList; the literals "Unknown"/"Error" map to those
    kinds; anything else is an Entity.

    :param text: Answer string, typically what follows the answer anchor.
    :type text: str
    :rtype: :class:`Answer`
    """
    text = _clean(text or "")
    if not text:
        return Answer.unknown(chain, source)
    lowered = text.lower()
    if lowered == "unknown":
        return Answer.unknown(chain, source)
    if lowered == "error":
        return Answer.error(chain, source)
    if is_timestamp(text):
        return Answer(AnswerKind.TIMESTAMP, parse_timestamp(text), source, chain)

    try:
        pairs = PAIR_RE.findall(text)
        if pairs and not PAIR_RE.sub("", text).strip(" ,;\n\t"):
            value = tuple((entity.strip(), parse_timestamp(stamp)) for entity, stamp in pairs)
            return Answer(AnswerKind.ENTITY_TIME_LIST, value, source, chain)
        bare = BARE_PAIR_RE.match(text)
        if bare and "," not in text:
            return Answer(AnswerKind.ENTITY_TIME_LIST, ((bare.group(1), parse_timestamp(bare.group(2))),), source, chain)
    except MalformedTimestamp:
        pass
    return Answer(AnswerKind.ENTITY, text, source, chain)


def extract_answer(response_text, source=AnswerSource.IR):
    """
    Parses the answer that follows the final "So the answer is:" anchor.

    The full response is kept as the reasoning chain; a response without
    the anchor gives an Unknown answer.

    :rtype: :class:`Answer`
    """
    response_text = response_text or ""
    position = response_text.rfind(ANSWER_ANCHOR)
    if position < 0:
        return Answer.unknown(response_text, source)
    tail = response_text[position + len(ANSWER_ANCHOR):].strip()
    # the answer is the first non-empty line after the anchor
    tail = next((line for line in tail.splitlines() if line.strip()), "")
    return parse_answer_text(tail, source=source, chain=response_text)
