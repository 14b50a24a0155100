from __future__ import annotations

from datetime import date, datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remem.temporal import (
    NO_CONSTRAINT,
    EndOp,
    Granularity,
    InvalidCalendarDate,
    InvalidConstraint,
    MalformedTime,
    StartOp,
    TemporalConstraint,
    TimeInstant,
    TimeScope,
    format_absolute,
    normalize_instant,
    parse_instant,
    render_instant,
    satisfies,
    scope_sort_key,
    scope_to_interval,
    window_is_empty,
)

from .oracles import day_overlap, iso


def secs(y, m=1, d=1, hh=0, mm=0, ss=0):
    # independent route: datetime arithmetic from 0001-01-01
    return int((datetime(y, m, d, hh, mm, ss) - datetime(1, 1, 1)).total_seconds())


def test_parse_month():
    t = parse_instant("2002-02")
    assert (t.year, t.month, t.day) == (2002, 2, None)
    assert t.granularity is Granularity.MONTH


def test_parse_year_and_datetime():
    assert parse_instant("2023").granularity is Granularity.YEAR
    t = parse_instant("2023-05-08T13:45:10")
    assert t.granularity is Granularity.DATETIME
    assert t.time_of_day == 13 * 3600 + 45 * 60 + 10


@pytest.mark.parametrize("text", ["2022-02-30", "2023-13", "2023-00-01", "2021-02-29", "2023-01-01T24:00:00"])
def test_parse_invalid_calendar(text):
    with pytest.raises(InvalidCalendarDate):
        parse_instant(text)


@pytest.mark.parametrize("text", ["Feb 2002", "02-2002", "", "2002/02", "20021", "2002-2"])
def test_parse_malformed(text):
    with pytest.raises(MalformedTime):
        parse_instant(text)


def test_finer_fields_need_coarser():
    with pytest.raises(MalformedTime):
        TimeInstant(2002, None, 3)


@pytest.mark.parametrize(
    "text, lo, hi",
    [
        ("2002-02", secs(2002, 2, 1), secs(2002, 2, 28, 23, 59, 59)),
        ("2024-02", secs(2024, 2, 1), secs(2024, 2, 29, 23, 59, 59)),
        ("2003", secs(2003), secs(2003, 12, 31, 23, 59, 59)),
        ("2003-06-30", secs(2003, 6, 30), secs(2003, 6, 30, 23, 59, 59)),
        ("2003-06-30T08:00:01", secs(2003, 6, 30, 8, 0, 1), secs(2003, 6, 30, 8, 0, 1)),
    ],
)
def test_normalize(text, lo, hi):
    assert normalize_instant(parse_instant(text)) == (lo, hi)


def test_format_absolute():
    assert format_absolute(secs(2002, 2, 28, 23, 59, 59)) == "2002-02-28T23:59:59"


def test_scope_to_interval():
    assert scope_to_interval(TimeScope.at("2002-02")) == normalize_instant(parse_instant("2002-02"))
    assert scope_to_interval(TimeScope.between("2002", None)) == (secs(2002), None)
    assert scope_to_interval(TimeScope.between(None, "2003-06")) == (None, secs(2003, 6, 30, 23, 59, 59))


def test_interval_order_enforced():
    with pytest.raises(InvalidCalendarDate):
        TimeScope.between("2004", "2003")
    # same granule both ends is fine
    TimeScope.between("2003-05", "2003")


def test_scope_json_roundtrip():
    for s in (TimeScope.at("2002-02"), TimeScope.between("2001", None), TimeScope.between(None, "2003-06-30")):
        assert TimeScope.from_json(s.to_json()) == s


def c(start=None, end=None, so="GE", eo="LE"):
    return TemporalConstraint.build(start, end, so, eo)


def test_satisfies_examples():
    assert satisfies(TimeScope.at("2002-02"), c("2002-01", "2002-12"))
    assert not satisfies(TimeScope.at("2002-02"), c("2002-03"))
    assert satisfies(TimeScope.between("2001", "2003"), c("2002-06", "2002-08"))


def test_interval_example_agrees_with_day_enumeration():
    a, b = date(2001, 1, 1).toordinal(), date(2003, 12, 31).toordinal()
    s, e = date(2002, 6, 1).toordinal(), date(2002, 8, 31).toordinal()
    assert day_overlap((a, b), ("GE", s), ("LE", e), (a - 10, b + 10))


def test_untimed_items():
    assert satisfies(None, NO_CONSTRAINT)
    assert not satisfies(None, c("2002"))
    assert not satisfies(None, c(end="2002", eo="LT"))


def test_strict_operators_use_whole_granule():
    feb = TimeScope.at("2002-02")
    assert not satisfies(feb, c("2002-02", so="GT"))
    assert satisfies(feb, c("2002-01", so="GT"))
    assert not satisfies(feb, c(end="2002-02", eo="LT"))
    assert satisfies(feb, c(end="2002-03", eo="LT"))


def test_eq_is_granule_containment():
    assert satisfies(TimeScope.at("2002-02-14"), c("2002-02", so="EQ"))
    assert not satisfies(TimeScope.between("2002-01-31", "2002-02-03"), c("2002-02", so="EQ"))
    assert satisfies(TimeScope.between("2002-01-31", "2002-02-03"), c(end="2002-02", eo="EQ"))


def test_eq_needs_bound():
    with pytest.raises(InvalidConstraint):
        TemporalConstraint(start_operator=StartOp.EQ)
    with pytest.raises(InvalidConstraint):
        TemporalConstraint(end_operator=EndOp.EQ)


def test_operator_aliases():
    assert c("2002", so=">").start_operator is StartOp.GT
    assert c(end="2002", eo="<=").end_operator is EndOp.LE
    assert c("2002", so="ge").start_operator is StartOp.GE


def test_empty_window():
    assert window_is_empty(c("2002-03-05", "2002-03-06", "GT", "LT"))
    assert not window_is_empty(c("2002-03-05", "2002-03-07", "GT", "LT"))
    assert not satisfies(TimeScope.between("2002", "2003"), c("2002-03-05", "2002-03-06", "GT", "LT"))


def test_sort_key_places_untimed_last():
    keys = [scope_sort_key(None), scope_sort_key(TimeScope.at("2002")), scope_sort_key(TimeScope.between(None, "1990"))]
    assert sorted(keys) == [keys[2], keys[1], keys[0]]


# -- properties ---------------------------------------------------------

instants = st.builds(
    lambda y, m, d, g: TimeInstant(y, *((None, None), (m, None), (m, d))[g]),
    st.integers(1, 9999), st.integers(1, 12), st.integers(1, 28), st.integers(0, 2),
)


@given(instants)
def test_normalize_is_ordered(t):
    lo, hi = normalize_instant(t)
    assert lo <= hi


@given(instants)
def test_render_parse_identity(t):
    assert parse_instant(render_instant(t)) == t


DAY0 = date(2020, 1, 1).toordinal()
days = st.integers(DAY0, DAY0 + 90)


@st.composite
def day_cases(draw):
    kind = draw(st.sampled_from(["none", "point", "interval"]))
    if kind == "none":
        scope = None
    elif kind == "point":
        scope = draw(days)
        scope = (scope, scope)
    else:
        a = draw(st.one_of(st.none(), days))
        b = draw(st.one_of(st.none(), days))
        if a is not None and b is not None and a > b:
            a, b = b, a
        scope = (a, b)
    start = draw(st.one_of(st.none(), st.tuples(st.sampled_from(["GE", "GT", "EQ"]), days)))
    end = draw(st.one_of(st.none(), st.tuples(st.sampled_from(["LE", "LT", "EQ"]), days)))
    return kind, scope, start, end


def to_objects(kind, scope, start, end):
    if kind == "none":
        s = None
    elif kind == "point":
        s = TimeScope.at(iso(scope[0]))
    else:
        s = TimeScope.between(*(None if d is None else iso(d) for d in scope))
    cons = TemporalConstraint.build(
        iso(start[1]) if start else None, iso(end[1]) if end else None,
        start[0] if start else "GE", end[0] if end else "LE",
    )
    return s, cons


@settings(max_examples=500)
@given(day_cases())
def test_satisfies_matches_day_enumeration(case):
    kind, scope, start, end = case
    s, cons = to_objects(*case)
    universe = (DAY0 - 5, DAY0 + 95)
    assert satisfies(s, cons) == day_overlap(None if kind == "none" else scope, start, end, universe)


@given(day_cases(), st.integers(0, 30), st.integers(0, 30))
def test_window_widening_is_monotone(case, widen_lo, widen_hi):
    kind, scope, start, end = case
    if (start and start[0] == "EQ") or (end and end[0] == "EQ"):
        return
    wider = (
        kind, scope,
        (start[0], start[1] - widen_lo) if start else None,
        (end[0], end[1] + widen_hi) if end else None,
    )
    s, narrow = to_objects(*case)
    _, wide = to_objects(*wider)
    if satisfies(s, narrow):
        assert satisfies(s, wide)
