import calendar
from datetime import date

import numpy as np
import pytest

from src.core.errors import MalformedTimestamp
from src.core.timestamp import Granularity, Ordering, TimeStamp, compare_timestamps, is_timestamp, parse_timestamp


@pytest.mark.parametrize("text, expected, granularity", [
    ("2009", TimeStamp(2009), Granularity.YEAR),
    ("2010-01", TimeStamp(2010, 1), Granularity.MONTH),
    ("2009-05-12", TimeStamp(2009, 5, 12), Granularity.DAY),
])
def test_parse_keeps_granularity(text, expected, granularity):
    stamp = parse_timestamp(text)
    assert stamp == expected
    assert stamp.granularity is granularity
    assert stamp.render() == text


@pytest.mark.parametrize("text", [
    "2009-13", "2009-02-30", "2007-02-29", "09-05", "2009/05/12", "May 2009", "", "2009-5-1",
    " 2008-02-29 ", "2009\n", "\u0662\u0660\u0660\u0669", "\uff12\uff10\uff10\uff19-05",
])
def test_parse_rejects_malformed(text):
    with pytest.raises(MalformedTimestamp):
        parse_timestamp(text)
    assert not is_timestamp(text)


def test_parse_rejects_non_strings():
    with pytest.raises(MalformedTimestamp):
        parse_timestamp(2009)


def test_day_without_month_is_rejected():
    with pytest.raises(MalformedTimestamp):
        TimeStamp(2009, None, 3)


def test_render_zero_pads():
    assert TimeStamp(987, 3, 4).render() == "0987-03-04"
    assert str(TimeStamp(2010, 1)) == "2010-01"


def test_compare_orders_and_overlaps():
    assert compare_timestamps(parse_timestamp("2009-05-08"), parse_timestamp("2009-05-12")) is Ordering.BEFORE
    assert compare_timestamps(parse_timestamp("2010"), parse_timestamp("2009-12-31")) is Ordering.AFTER
    assert compare_timestamps(parse_timestamp("2009-05"), parse_timestamp("2009-05-12")) is Ordering.OVERLAPS
    assert compare_timestamps(parse_timestamp("2009"), parse_timestamp("2009")) is Ordering.OVERLAPS
    assert compare_timestamps(parse_timestamp("2009-04"), parse_timestamp("2009-05-01")) is Ordering.BEFORE


def test_truncate_only_coarsens():
    stamp = TimeStamp(2009, 5, 12)
    assert stamp.truncate(Granularity.MONTH) == TimeStamp(2009, 5)
    assert stamp.truncate(Granularity.YEAR) == TimeStamp(2009)
    assert TimeStamp(2009).truncate(Granularity.DAY) == TimeStamp(2009)


def test_to_range_zero_extends():
    assert TimeStamp(2008, 2).to_range() == (date(2008, 2, 1), date(2008, 2, 29))
    assert TimeStamp(2009).to_range() == (date(2009, 1, 1), date(2009, 12, 31))
    assert TimeStamp(2009, 5, 12).to_range() == (date(2009, 5, 12), date(2009, 5, 12))


def _random_stamps(count, seed, years=(1, 9998)):
    rng = np.random.default_rng(seed)
    stamps = []
    for _ in range(count):
        year = int(rng.integers(years[0], years[1] + 1))
        granularity = int(rng.integers(1, 4))
        if granularity == 1:
            stamps.append(TimeStamp(year))
            continue
        month = int(rng.integers(1, 13))
        if granularity == 2:
            stamps.append(TimeStamp(year, month))
        else:
            stamps.append(TimeStamp(year, month, int(rng.integers(1, calendar.monthrange(year, month)[1] + 1))))
    return stamps


def test_render_and_parse_round_trip():
    for stamp in _random_stamps(2000, seed=4):
        text = stamp.render()
        assert parse_timestamp(text) == stamp
        assert parse_timestamp(text).render() == text


def _day_span(stamp):
    """First and last ordinal day covered, counted independently of TimeStamp.to_range."""
    first = date(stamp.year, stamp.month or 1, stamp.day or 1).toordinal()
    if stamp.day is not None:
        return first, first
    if stamp.month is not None:
        following = date(stamp.year + (stamp.month == 12), stamp.month % 12 + 1, 1)
    else:
        following = date(stamp.year + 1, 1, 1)
    return first, following.toordinal() - 1


def _ordering_by_days(a, b):
    (a_first, a_last), (b_first, b_last) = _day_span(a), _day_span(b)
    if a_last < b_first:
        return Ordering.BEFORE
    if b_last < a_first:
        return Ordering.AFTER
    return Ordering.OVERLAPS


def test_compare_agrees_with_day_count_oracle():
    stamps = _random_stamps(300, seed=9, years=(2008, 2010))
    opposite = {Ordering.BEFORE: Ordering.AFTER, Ordering.AFTER: Ordering.BEFORE, Ordering.OVERLAPS: Ordering.OVERLAPS}
    seen = set()
    for a, b in zip(stamps, stamps[1:] + stamps[:1]):
        ordering = compare_timestamps(a, b)
        assert ordering is _ordering_by_days(a, b)
        assert compare_timestamps(b, a) is opposite[ordering]
        seen.add(ordering)
    assert seen == set(Ordering)
    assert compare_timestamps(TimeStamp(2011, 4), TimeStamp(2008)) is Ordering.AFTER
