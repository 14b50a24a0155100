"""Vectorised temporal filtering over many scopes at once."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .temporal import (
    NEG_INF,
    POS_INF,
    EndOp,
    StartOp,
    TemporalConstraint,
    TimeScope,
    normalize_instant,
    window_is_empty,
    scope_to_interval,
)

_START_MODE = {StartOp.GE: kernels.MODE_INCLUSIVE, StartOp.GT: kernels.MODE_STRICT, StartOp.EQ: kernels.MODE_EQ}
_END_MODE = {EndOp.LE: kernels.MODE_INCLUSIVE, EndOp.LT: kernels.MODE_STRICT, EndOp.EQ: kernels.MODE_EQ}


@dataclass(frozen=True)
class ScopeArrays:
    earliest: np.ndarray  # int64, NEG_INF when unbounded
    latest: np.ndarray  # int64, POS_INF when unbounded
    timed: np.ndarray  # uint8

    @classmethod
    def from_scopes(cls, scopes: Sequence[Optional[TimeScope]]) -> "ScopeArrays":
        n = len(scopes)
        earliest = np.full(n, NEG_INF, dtype=np.int64)
        latest = np.full(n, POS_INF, dtype=np.int64)
        timed = np.zeros(n, dtype=np.uint8)
        for i, s in enumerate(scopes):
            if s is None:
                continue
            e, l = scope_to_interval(s)
            timed[i] = 1
            if e is not None:
                earliest[i] = e
            if l is not None:
                latest[i] = l
        return cls(earliest, latest, timed)

    def __len__(self) -> int:
        return int(self.earliest.shape[0])


def constraint_mask(arrays: ScopeArrays, c: TemporalConstraint) -> np.ndarray:
    if window_is_empty(c):
        return np.zeros(len(arrays), dtype=bool)
    start_mode = end_mode = kernels.MODE_NONE
    s_lo = s_hi = e_lo = e_hi = 0
    if c.start_bound is not None:
        start_mode = _START_MODE[c.start_operator]
        s_lo, s_hi = normalize_instant(c.start_bound)
    if c.end_bound is not None:
        end_mode = _END_MODE[c.end_operator]
        e_lo, e_hi = normalize_instant(c.end_bound)
    return kernels.window_mask(
        arrays.earliest, arrays.latest, arrays.timed,
        start_mode, s_lo, s_hi, end_mode, e_lo, e_hi,
    )
