"""
Multi-granularity timestamps.

Facts and answers carry times at year, month or day resolution. Values
are rendered in ISO 8601 prefix form (``yyyy``, ``yyyy-mm``, ``yyyy-mm-dd``)
and ordered component-wise over the granularity both operands share.
"""

import calendar
import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Optional

from .errors import MalformedTimestamp

ISO_PREFIX_RE = re.compile(r"^([0-9]{4})(?:-([0-9]{2})(?:-([0-9]{2}))?)?\Z")


class Granularity(Enum):
    YEAR = 1
    MONTH = 2
    DAY = 3

    @property
    def label(self):
        return self.name.capitalize()


class Ordering(Enum):
    BEFORE = "Before"
    AFTER = "After"
    OVERLAPS = "Overlaps"


@dataclass(frozen=True)
class TimeStamp:
    """A time value at year, month or day granularity."""

    year: int
    month: Optional[int] = None
    day: Optional[int] = None

    def __post_init__(self):
        if self.day is not None and self.month is None:
            raise MalformedTimestamp(f"day given without month: {self.year}-??-{self.day}")
        if not 1 <= self.year <= 9999:
            raise MalformedTimestamp(f"year out of range: {self.year}")
        if self.month is not None and not 1 <= self.month <= 12:
            raise MalformedTimestamp(f"month out of range: {self.month}")
        if self.day is not None:
            last_day = calendar.monthrange(self.year, self.month)[1]
            if not 1 <= self.day <= last_day:
                raise MalformedTimestamp(
                    f"day out of range: {self.year:04d}-{self.month:02d}-{self.day}"
                )

    @property
    def granularity(self):
        if self.day is not None:
            return Granularity.DAY
        if self.month is not None:
            return Granularity.MONTH
        return Granularity.YEAR

    def components(self):
        """Returns the populated (year[, month[, day]]) tuple."""
        return tuple(c for c in (self.year, self.month, self.day) if c is not None)

    def render(self):
        """
        Renders the canonical ISO prefix string.

        :return: ``yyyy``, ``yyyy-mm`` or ``yyyy-mm-dd``, zero-padded.
        :rtype: str
        """
        text = f"{self.year:04d}"
        if self.month is not None:
            text += f"-{self.month:02d}"
        if self.day is not None:
            text += f"-{self.day:02d}"
        return text

    def truncate(self, granularity):
        """Coarsens the stamp to ``granularity`` (never refines it)."""
        if granularity.value >= self.granularity.value:
            return self
        if granularity is Granularity.YEAR:
            return TimeStamp(self.year)
        return TimeStamp(self.year, self.month)

    def to_range(self):
        """
        Zero-extends the stamp to the closed interval of days it covers.

        :return: First and last day covered by the stamp.
        :rtype: (:class:`datetime.date`, :class:`datetime.date`)
        """
        if self.granularity is Granularity.DAY:
            day = date(self.year, self.month, self.day)
            return day, day
        if self.granularity is Granularity.MONTH:
            last_day = calendar.monthrange(self.year, self.month)[1]
            return date(self.year, self.month, 1), date(self.year, self.month, last_day)
        return date(self.year, 1, 1), date(self.year, 12, 31)

    def __str__(self):
        return self.render()


def parse_timestamp(text):
    """
    Parses a canonical ISO prefix string into a :class:`TimeStamp`.

    Natural-language phrases ("January 2010") are not accepted here; they
    are rewritten upstream by the time standardizer.

    :param text: ``yyyy``, ``yyyy-mm`` or ``yyyy-mm-dd``, ASCII digits, no padding.
    :type text: str
    :return: Parsed timestamp whose granularity matches the component count.
    :rtype: :class:`TimeStamp`
    :raises MalformedTimestamp: non-numeric parts, wrong separator or out of range values.
    """
    if not isinstance(text, str):
        raise MalformedTimestamp(f"timestamp must be a string, got {type(text).__name__}")
    match = ISO_PREFIX_RE.match(text)
    if match is None:
        raise MalformedTimestamp(f"not an ISO prefix timestamp: {text!r}")
    year, month, day = match.groups()
    return TimeStamp(
        int(year),
        int(month) if month is not None else None,
        int(day) if day is not None else None,
    )


def is_timestamp(text):
    """Returns True when ``text`` parses as a canonical timestamp."""
    try:
        parse_timestamp(text)
    except MalformedTimestamp:
        return False
    return True


def compare_timestamps(a, b):
    """
    Compares two timestamps over the granularity they share.

    When one value is a prefix of the other (or they are equal) the result is
    ``Overlaps``; callers needing a strict order zero-extend with
    :meth:`TimeStamp.to_range`.

    :param a: Left operand.
    :type a: :class:`TimeStamp`
    :param b: Right operand.
    :type b: :class:`TimeStamp`
    :rtype: :class:`Ordering`
    """
    shared = min(len(a.components()), len(b.components()))
    left, right = a.components()[:shared], b.components()[:shared]
    if left < right:
        return Ordering.BEFORE
    if left > right:
        return Ordering.AFTER
    return Ordering.OVERLAPS
