"""
Temporal facts and the immutable store that holds them.

A store is built once from a TSV or JSON-lines file (see :func:`load_tkg`)
and is then only read: the solver, retriever and evaluation all share it.
"""

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Optional

from .errors import MalformedLine, MalformedTimestamp, TkgIoError
from .log_utils import get_logger
from .timestamp import Ordering, TimeStamp, compare_timestamps, parse_timestamp

logger = get_logger(__name__)


class TkgFormat(Enum):
    TSV_QUADRUPLE = "tsv-quadruple"
    TSV_QUINTUPLE = "tsv-quintuple"
    JSON_LINES = "json-lines"


@dataclass(frozen=True)
class TemporalFact:
    """One point fact (s, p, o, t) or interval fact (s, p, o, t_start, t_end)."""

    fact_id: int
    subject: str
    predicate: str
    object: str
    time: Optional[TimeStamp] = None
    start: Optional[TimeStamp] = None
    end: Optional[TimeStamp] = None

    def __post_init__(self):
        has_point = self.time is not None
        has_interval = self.start is not None or self.end is not None
        if has_point == has_interval:
            raise ValueError("a fact needs either a point time or a (start, end) interval")
        if has_interval:
            if self.start is None or self.end is None:
                raise ValueError("interval facts need both start and end")
            if compare_timestamps(self.start, self.end) is Ordering.AFTER:
                raise ValueError(f"interval start {self.start} is after end {self.end}")
        for name in ("subject", "predicate", "object"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"fact {name} must be a non-empty string")

    @property
    def is_interval(self):
        return self.time is None

    def key(self):
        """Identity used for de-duplication: everything except the fact id."""
        return (
            self.subject,
            self.predicate,
            self.object,
            self.time.render() if self.time else None,
            self.start.render() if self.start else None,
            self.end.render() if self.end else None,
        )

    def to_dict(self):
        data = {"subject": self.subject, "predicate": self.predicate, "object": self.object}
        if self.is_interval:
            data["start"] = self.start.render()
            data["end"] = self.end.render()
        else:
            data["time"] = self.time.render()
        return data

    def __repr__(self):
        when = f"{self.start}..{self.end}" if self.is_interval else str(self.time)
        return f"TemporalFact[{self.fact_id}]: ({self.subject}, {self.predicate}, {self.object}, {when})"


@dataclass(frozen=True)
class LoadReport:
    loaded: int = 0
    duplicates: int = 0
    skipped: int = 0


class TkgStore:
    """Read-only collection of temporal facts with entity and predicate indices."""

    def __init__(self, facts=(), report=None):
        """
        Creates a store from already numbered facts.

        :param facts: Facts whose ``fact_id`` values are unique.
        :type facts: iterable of :class:`TemporalFact`
        :param report: Counts gathered while loading, if any.
        :type report: :class:`LoadReport`, optional
        """
        self._facts = tuple(sorted(facts, key=lambda f: f.fact_id))
        by_id = {}
        by_entity = {}
        for fact in self._facts:
            if fact.fact_id in by_id:
                raise ValueError(f"duplicate fact_id {fact.fact_id}")
            by_id[fact.fact_id] = fact
            for entity in (fact.subject, fact.object):
                by_entity.setdefault(entity, []).append(fact.fact_id)

        self._by_id = MappingProxyType(by_id)
        self._by_entity = MappingProxyType({k: tuple(v) for k, v in by_entity.items()})
        self.entities = frozenset(by_entity)
        self.predicates = frozenset(f.predicate for f in self._facts)
        self.report = report or LoadReport(loaded=len(self._facts))

    @property
    def facts(self):
        return self._facts

    def __len__(self):
        return len(self._facts)

    def __iter__(self):
        return iter(self._facts)

    def get_fact(self, fact_id):
        """
        Gets a fact by its id.

        :param fact_id: Id assigned at load time.
        :type fact_id: int
        :return: The fact, or ``None`` if the id is unknown.
        :rtype: :class:`TemporalFact`
        """
        if fact_id not in self._by_id:
            warnings.warn(f"Fact not found: {fact_id}")
            return None
        return self._by_id[fact_id]

    def facts_about(self, entity):
        """Returns the facts in which ``entity`` is subject or object."""
        return [self._by_id[i] for i in self._by_entity.get(entity, ())]

    def content_hash(self):
        """SHA-256 over the canonical JSON of every fact, in id order."""
        digest = hashlib.sha256()
        for fact in self._facts:
            digest.update(json.dumps(fact.to_dict(), ensure_ascii=False, sort_keys=True).encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()

    def __repr__(self):
        return f"TkgStore: {len(self)} facts, {len(self.entities)} entities, {len(self.predicates)} predicates"


######################## LOADING ##############################
def _fact_from_fields(fields, line_no):
    """Builds an unnumbered fact (fact_id=-1) from parsed string fields."""
    try:
        if "time" in fields:
            return TemporalFact(
                -1, fields["subject"], fields["predicate"], fields["object"],
                time=parse_timestamp(fields["time"]),
            )
        return TemporalFact(
            -1, fields["subject"], fields["predicate"], fields["object"],
            start=parse_timestamp(fields["start"]), end=parse_timestamp(fields["end"]),
        )
    except (MalformedTimestamp, ValueError, KeyError, TypeError) as exc:
        raise MalformedLine(line_no, str(exc)) from exc


def _decode_line(raw, line_no):
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedLine(line_no, f"invalid UTF-8 at byte {exc.start}") from exc


def _parse_tsv_line(line, line_no, tkg_format):
    columns = line.split("\t")
    if tkg_format is TkgFormat.TSV_QUADRUPLE:
        if len(columns) != 4:
            raise MalformedLine(line_no, f"expected 4 tab-separated columns, got {len(columns)}")
        subject, predicate, obj, time = columns
        return _fact_from_fields(
            {"subject": subject, "predicate": predicate, "object": obj, "time": time}, line_no
        )
    if len(columns) != 5:
        raise MalformedLine(line_no, f"expected 5 tab-separated columns, got {len(columns)}")
    subject, predicate, obj, start, end = columns
    return _fact_from_fields(
        {"subject": subject, "predicate": predicate, "object": obj, "start": start, "end": end}, line_no
    )


def _parse_json_line(line, line_no):
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(record, dict):
        raise MalformedLine(line_no, "expected a JSON object")
    if "time" in record and ("start" in record or "end" in record):
        raise MalformedLine(line_no, "give either time or start/end, not both")
    return _fact_from_fields(record, line_no)


def load_tkg(path, tkg_format=TkgFormat.TSV_QUADRUPLE, lenient=False):
    """
    Loads a temporal knowledge graph file into an immutable store.

    Duplicate facts (same subject, predicate, object and time fields) are
    kept once; fact ids follow first-occurrence order starting at 0.

    :param path: File to read (UTF-8).
    :type path: str or :class:`pathlib.Path`
    :param tkg_format: Layout of the file.
    :type tkg_format: :class:`TkgFormat` or str
    :param lenient: Skip malformed lines with a warning instead of failing.
    :type lenient: bool
    :return: Populated store; ``store.report`` holds loaded/duplicate/skipped counts.
    :rtype: :class:`TkgStore`
    :raises TkgIoError: the file cannot be read.
    :raises MalformedLine: a line is malformed and ``lenient`` is False.
    """
    tkg_format = TkgFormat(tkg_format)
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise TkgIoError(f"cannot read TKG file {path}: {exc}") from exc

    facts = []
    seen = set()
    duplicates = 0
    skipped = 0
    for line_no, raw in enumerate(data.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            line = _decode_line(raw, line_no)
            if tkg_format is TkgFormat.JSON_LINES:
                fact = _parse_json_line(line, line_no)
            else:
                fact = _parse_tsv_line(line, line_no, tkg_format)
        except MalformedLine as exc:
            if not lenient:
                raise
            warnings.warn(f"Skipping malformed TKG line in {path.name}: {exc}")
            skipped += 1
            continue

        if fact.key() in seen:
            duplicates += 1
            continue
        seen.add(fact.key())
        facts.append(TemporalFact(
            len(facts), fact.subject, fact.predicate, fact.object,
            time=fact.time, start=fact.start, end=fact.end,
        ))

    report = LoadReport(loaded=len(facts), duplicates=duplicates, skipped=skipped)
    logger.info(
        f"Loaded {report.loaded} facts from {path} "
        f"({report.duplicates} duplicates dropped, {report.skipped} lines skipped)"
    )
    return TkgStore(facts, report=report)


def dump_facts(store, path):
    """
    Writes a store as JSON-lines in fact id order.

    Reading the file back with ``TkgFormat.JSON_LINES`` reproduces the same ids.

    :param store: Store to write.
    :type store: :class:`TkgStore`
    :param path: Output file.
    :type path: str or :class:`pathlib.Path`
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for fact in store:
            handle.write(json.dumps(fact.to_dict(), ensure_ascii=False) + "\n")
