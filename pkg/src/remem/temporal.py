"""Time instants, scopes and the start/end operator filter shared by every tool.

Instants carry their granularity; a coarse instant such as ``2002-02`` stands
for the whole month.  Absolute instants are plain ``int`` seconds counted from
``0001-01-01T00:00:00`` in the proleptic Gregorian calendar (no time zones).
"""

from __future__ import annotations

import calendar
import enum
import re
from dataclasses import dataclass
from datetime import date
from typing import Optional, Tuple

SECONDS_PER_DAY = 86_400

# Sentinels for unbounded scope edges inside vectorised kernels (fit int64).
NEG_INF = -(2**62)
POS_INF = 2**62


class TemporalError(ValueError):
    pass


class MalformedTime(TemporalError):
    pass


class InvalidCalendarDate(TemporalError):
    pass


class InvalidConstraint(TemporalError):
    pass


class Granularity(enum.IntEnum):
    YEAR = 1
    MONTH = 2
    DAY = 3
    DATETIME = 4


_ISO_RE = re.compile(
    r"^(?P<year>\d{4})"
    r"(?:-(?P<month>\d{2})"
    r"(?:-(?P<day>\d{2})"
    r"(?:T(?P<hh>\d{2}):(?P<mm>\d{2}):(?P<ss>\d{2}))?)?)?$"
)


@dataclass(frozen=True, order=False)
class TimeInstant:
    year: int
    month: Optional[int] = None
    day: Optional[int] = None
    time_of_day: Optional[int] = None  # seconds since midnight

    def __post_init__(self) -> None:
        if self.day is not None and self.month is None:
            raise MalformedTime("day requires month")
        if self.time_of_day is not None and self.day is None:
            raise MalformedTime("time of day requires day")
        if not 1 <= self.year <= 9999:
            raise InvalidCalendarDate(f"year out of range: {self.year}")
        if self.month is not None and not 1 <= self.month <= 12:
            raise InvalidCalendarDate(f"month out of range: {self.month}")
        if self.day is not None:
            last = calendar.monthrange(self.year, self.month)[1]
            if not 1 <= self.day <= last:
                raise InvalidCalendarDate(
                    f"no day {self.day} in {self.year:04d}-{self.month:02d}"
                )
        if self.time_of_day is not None and not 0 <= self.time_of_day < SECONDS_PER_DAY:
            raise InvalidCalendarDate(f"time of day out of range: {self.time_of_day}")

    @property
    def granularity(self) -> Granularity:
        if self.time_of_day is not None:
            return Granularity.DATETIME
        if self.day is not None:
            return Granularity.DAY
        if self.month is not None:
            return Granularity.MONTH
        return Granularity.YEAR

    def render(self) -> str:
        return render_instant(self)

    def __str__(self) -> str:
        return render_instant(self)


def parse_instant(text: str) -> TimeInstant:
    """Parse ``YYYY``, ``YYYY-MM``, ``YYYY-MM-DD`` or ``YYYY-MM-DDThh:mm:ss``."""
    if not isinstance(text, str):
        raise MalformedTime(f"expected a string, got {type(text).__name__}")
    m = _ISO_RE.match(text.strip())
    if m is None:
        raise MalformedTime(f"not an ISO-8601 prefix form: {text!r}")
    year = int(m["year"])
    month = int(m["month"]) if m["month"] else None
    day = int(m["day"]) if m["day"] else None
    tod = None
    if m["hh"]:
        hh, mm, ss = int(m["hh"]), int(m["mm"]), int(m["ss"])
        if hh > 23 or mm > 59 or ss > 59:
            raise InvalidCalendarDate(f"bad time of day in {text!r}")
        tod = hh * 3600 + mm * 60 + ss
    return TimeInstant(year, month, day, tod)


def render_instant(t: TimeInstant) -> str:
    out = f"{t.year:04d}"
    if t.month is not None:
        out += f"-{t.month:02d}"
    if t.day is not None:
        out += f"-{t.day:02d}"
    if t.time_of_day is not None:
        hh, rem = divmod(t.time_of_day, 3600)
        mm, ss = divmod(rem, 60)
        out += f"T{hh:02d}:{mm:02d}:{ss:02d}"
    return out


def _day_start(y: int, m: int, d: int) -> int:
    return (date(y, m, d).toordinal() - 1) * SECONDS_PER_DAY


def normalize_instant(t: TimeInstant) -> Tuple[int, int]:
    """Return the first and last second covered by the instant's granule."""
    g = t.granularity
    if g is Granularity.YEAR:
        return _day_start(t.year, 1, 1), _day_start(t.year, 12, 31) + SECONDS_PER_DAY - 1
    if g is Granularity.MONTH:
        last = calendar.monthrange(t.year, t.month)[1]
        return (
            _day_start(t.year, t.month, 1),
            _day_start(t.year, t.month, last) + SECONDS_PER_DAY - 1,
        )
    start = _day_start(t.year, t.month, t.day)
    if g is Granularity.DAY:
        return start, start + SECONDS_PER_DAY - 1
    return start + t.time_of_day, start + t.time_of_day


def format_absolute(seconds: int) -> str:
    days, tod = divmod(seconds, SECONDS_PER_DAY)
    d = date.fromordinal(days + 1)
    hh, rem = divmod(tod, 3600)
    mm, ss = divmod(rem, 60)
    return f"{d.isoformat()}T{hh:02d}:{mm:02d}:{ss:02d}"


class ScopeKind(str, enum.Enum):
    POINT = "point"
    INTERVAL = "interval"


@dataclass(frozen=True)
class TimeScope:
    kind: ScopeKind
    point: Optional[TimeInstant] = None
    start: Optional[TimeInstant] = None
    end: Optional[TimeInstant] = None

    def __post_init__(self) -> None:
        if self.kind is ScopeKind.POINT:
            if self.point is None or self.start is not None or self.end is not None:
                raise MalformedTime("a point scope holds exactly one instant")
        else:
            if self.point is not None:
                raise MalformedTime("an interval scope has no point")
            if self.start is not None and self.end is not None:
                if normalize_instant(self.start)[0] > normalize_instant(self.end)[1]:
                    raise InvalidCalendarDate(
                        f"interval starts after it ends: {self.start} > {self.end}"
                    )

    @classmethod
    def at(cls, t: TimeInstant | str) -> "TimeScope":
        return cls(ScopeKind.POINT, point=_coerce(t))

    @classmethod
    def between(
        cls, start: TimeInstant | str | None = None, end: TimeInstant | str | None = None
    ) -> "TimeScope":
        return cls(ScopeKind.INTERVAL, start=_coerce(start), end=_coerce(end))

    def to_json(self) -> dict:
        if self.kind is ScopeKind.POINT:
            return {"kind": "point", "point": render_instant(self.point)}
        return {
            "kind": "interval",
            "start": render_instant(self.start) if self.start else None,
            "end": render_instant(self.end) if self.end else None,
        }

    @classmethod
    def from_json(cls, obj: Optional[dict]) -> Optional["TimeScope"]:
        if obj is None:
            return None
        if obj.get("kind") == "point":
            return cls.at(obj["point"])
        if obj.get("kind") == "interval":
            return cls.between(obj.get("start"), obj.get("end"))
        raise MalformedTime(f"unknown scope kind in {obj!r}")


def _coerce(t: TimeInstant | str | None) -> Optional[TimeInstant]:
    if t is None or isinstance(t, TimeInstant):
        return t
    return parse_instant(t)


def scope_to_interval(s: TimeScope) -> Tuple[Optional[int], Optional[int]]:
    """Closed absolute interval of a scope; ``None`` marks an unbounded side."""
    if s.kind is ScopeKind.POINT:
        return normalize_instant(s.point)
    earliest = normalize_instant(s.start)[0] if s.start is not None else None
    latest = normalize_instant(s.end)[1] if s.end is not None else None
    return earliest, latest


class StartOp(str, enum.Enum):
    GE = "GE"
    GT = "GT"
    EQ = "EQ"


class EndOp(str, enum.Enum):
    LE = "LE"
    LT = "LT"
    EQ = "EQ"


@dataclass(frozen=True)
class TemporalConstraint:
    start_bound: Optional[TimeInstant] = None
    end_bound: Optional[TimeInstant] = None
    start_operator: StartOp = StartOp.GE
    end_operator: EndOp = EndOp.LE

    def __post_init__(self) -> None:
        # Operator strings from tool arguments are accepted in any case.
        object.__setattr__(self, "start_operator", StartOp(str(_op_name(self.start_operator))))
        object.__setattr__(self, "end_operator", EndOp(str(_op_name(self.end_operator))))
        if self.start_operator is StartOp.EQ and self.start_bound is None:
            raise InvalidConstraint("EQ start operator needs a start bound")
        if self.end_operator is EndOp.EQ and self.end_bound is None:
            raise InvalidConstraint("EQ end operator needs an end bound")

    @classmethod
    def build(
        cls,
        start: TimeInstant | str | None = None,
        end: TimeInstant | str | None = None,
        start_operator: str | StartOp = StartOp.GE,
        end_operator: str | EndOp = EndOp.LE,
    ) -> "TemporalConstraint":
        return cls(_coerce(start), _coerce(end), start_operator, end_operator)

    @property
    def is_empty(self) -> bool:
        return self.start_bound is None and self.end_bound is None


def _op_name(op) -> str:
    if isinstance(op, enum.Enum):
        return op.value
    name = str(op).strip().upper()
    aliases = {">=": "GE", ">": "GT", "=": "EQ", "==": "EQ", "<=": "LE", "<": "LT"}
    return aliases.get(name, name)


NO_CONSTRAINT = TemporalConstraint()


def window_is_empty(c: TemporalConstraint) -> bool:
    """True when two range bounds leave no instant between them.

    EQ sides pin a scope edge rather than open a range, so they never count.
    """
    if c.start_bound is None or c.end_bound is None:
        return False
    if c.start_operator is StartOp.EQ or c.end_operator is EndOp.EQ:
        return False
    s_lo, s_hi = normalize_instant(c.start_bound)
    e_lo, e_hi = normalize_instant(c.end_bound)
    first = s_lo if c.start_operator is StartOp.GE else s_hi + 1
    last = e_hi if c.end_operator is EndOp.LE else e_lo - 1
    return first > last


def satisfies(s: Optional[TimeScope], c: TemporalConstraint) -> bool:
    """Whether a scope overlaps the window described by ``c``.

    An untimed item (``s is None``) passes only when ``c`` sets no bound.
    """
    if c.is_empty:
        return True
    if s is None or window_is_empty(c):
        return False
    e, l = scope_to_interval(s)
    e = NEG_INF if e is None else e
    l = POS_INF if l is None else l

    if c.start_bound is not None:
        lo, hi = normalize_instant(c.start_bound)
        op = c.start_operator
        if op is StartOp.GE and not l >= lo:
            return False
        if op is StartOp.GT and not l > hi:
            return False
        if op is StartOp.EQ and not lo <= e <= hi:
            return False
    if c.end_bound is not None:
        lo, hi = normalize_instant(c.end_bound)
        op = c.end_operator
        if op is EndOp.LE and not e <= hi:
            return False
        if op is EndOp.LT and not e < lo:
            return False
        if op is EndOp.EQ and not lo <= l <= hi:
            return False
    return True


def scope_sort_key(s: Optional[TimeScope]) -> Tuple[int, int]:
    """Chronological key on the onset; untimed scopes sort after everything."""
    if s is None:
        return (1, 0)
    e, _ = scope_to_interval(s)
    return (0, NEG_INF if e is None else e)
