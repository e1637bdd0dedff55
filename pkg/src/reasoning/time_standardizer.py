""" Rewrites natural-language dates in questions to ISO prefix form. """

import re
from datetime import datetime

from dateutil import parser as date_parser

from ..core.timestamp import TimeStamp

_MONTH = (
    r"January|February|March|April|May|June|July|August|September|October|November|December"
    r"|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sept|Sep|Oct|Nov|Dec"
)
_DAY = r"(?<![\d-])(?P<{name}>\d{{1,2}})(?:st|nd|rd|th)?(?!\d)"
_YEAR = r"(?P<{name}>\d{{4}})(?![-\d])"

TIME_PHRASE_RE = re.compile(
    "|".join([
        _DAY.format(name="dmy_day") + rf"\s+(?:of\s+)?(?P<dmy_month>{_MONTH})\b\.?,?\s+" + _YEAR.format(name="dmy_year"),
        rf"\b(?P<mdy_month>{_MONTH})\b\.?\s+" + _DAY.format(name="mdy_day") + r",?\s+" + _YEAR.format(name="mdy_year"),
        rf"\b(?P<my_month>{_MONTH})\b\.?,?\s+" + _YEAR.format(name="my_year"),
    ]),
    re.IGNORECASE,
)


def _rewrite(match):
    groups = match.groupdict()
    for prefix in ("dmy", "mdy", "my"):
        if groups.get(f"{prefix}_month"):
            month, year = groups[f"{prefix}_month"], groups[f"{prefix}_year"]
            day = groups.get(f"{prefix}_day")
            break
    try:
        parsed = date_parser.parse(f"{day or 1} {month} {year}", default=datetime(2000, 1, 1))
    except (ValueError, OverflowError):
        return match.group(0)
    if day is None:
        return TimeStamp(parsed.year, parsed.month).render()
    return TimeStamp(parsed.year, parsed.month, parsed.day).render()


def standardize_time(question):
    """
    Rewrites date phrases to ISO prefix form at their own granularity.

    "7 July 2007" becomes ``2007-07-07``, "January 2010" becomes
    ``2010-01`` and "May 8, 2009" becomes ``2009-05-08``. Bare years are
    already canonical and phrases that do not name a real date are left
    alone. Applying the function twice gives the same text as applying it
    once.

    :param question: Question text.
    :type question: str
    :rtype: str
    """
    return TIME_PHRASE_RE.sub(_rewrite, question)
