"""Order-free analyses over windowed records.

These treat the in-window records as a bag: counts, rates, statistics,
and gated aggregates.  All statistics use the population convention
(std divides by N) and percentiles interpolate linearly between closest
ranks.  Rates are per millisecond; presentation layers convert.
"""

from __future__ import annotations

import math
from typing import Iterable

from ..core import GlobalWindow, TimeSeries, slice_series
from ..errors import (EmptyGatedSet, EmptyWindowData, SpecError,
                      ZeroWidthWindow)
from ..filters import EventPredicate

AGGREGATE_OPS = ("sum", "max", "min", "avg")
STAT_NAMES = ("mean", "std", "percentile")


def event_count(series: TimeSeries, predicate: EventPredicate,
                window: GlobalWindow) -> int:
    """Number of in-window records whose payload satisfies the predicate."""
    return sum(1 for rec in slice_series(series, window).records
               if predicate.matches(rec.payload))


def event_rate(series: TimeSeries, predicate: EventPredicate,
               window: GlobalWindow) -> float:
    """Matching events per millisecond of window."""
    width = window.end_ms - window.start_ms
    if width <= 0:
        raise ZeroWidthWindow("rate over a zero-width window is undefined")
    return event_count(series, predicate, window) / width


def numeric_values(series: TimeSeries, key: str,
                   window: GlobalWindow) -> list[float]:
    """In-window numeric observations of one key, in record order."""
    out = []
    for rec in slice_series(series, window).records:
        v = rec.payload.get(key)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(float(v))
    return out


def percentile(values: Iterable[float], p: float) -> float:
    """Linear interpolation between closest ranks; p in [0, 100]."""
    data = sorted(values)
    if not data:
        raise EmptyWindowData("percentile of an empty value set")
    if not 0.0 <= p <= 100.0:
        raise SpecError(f"percentile must be in [0, 100], got {p}")
    rank = (p / 100.0) * (len(data) - 1)
    lo = int(math.floor(rank))
    hi = int(math.ceil(rank))
    if lo == hi:
        return data[lo]
    frac = rank - lo
    return data[lo] * (1.0 - frac) + data[hi] * frac


def _stat(values: list[float], stat: str, p: float | None) -> float:
    if not values:
        raise EmptyWindowData(f"no values for statistic {stat!r}")
    if stat == "mean":
        return sum(values) / len(values)
    if stat == "std":
        mean = sum(values) / len(values)
        return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    if stat == "percentile":
        if p is None:
            raise SpecError("percentile statistic needs parameter p")
        return percentile(values, p)
    raise SpecError(f"unknown statistic {stat!r}")


def windowed_statistic(series: TimeSeries, key: str, window: GlobalWindow,
                       stat: str, p: float | None = None) -> float:
    """mean / std / percentile of one key's in-window values."""
    return _stat(numeric_values(series, key, window), stat, p)


def pooled_statistic(series_list: list[TimeSeries], key: str,
                     window: GlobalWindow, stat: str,
                     p: float | None = None) -> float:
    """Same, with values pooled across entities (SQL-aggregate style)."""
    values: list[float] = []
    for series in series_list:
        values.extend(numeric_values(series, key, window))
    return _stat(values, stat, p)


def gated_values(series: TimeSeries, key: str, predicate: EventPredicate,
                 window: GlobalWindow) -> list[float]:
    out = []
    for rec in slice_series(series, window).records:
        if not predicate.matches(rec.payload):
            continue
        v = rec.payload.get(key)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(float(v))
    return out


def conditional_aggregate(series: TimeSeries, key: str,
                          predicate: EventPredicate, window: GlobalWindow,
                          op: str) -> float:
    """sum / max / min / avg of a key over predicate-matching records.

    An empty gated set sums to zero; the other ops have no defined
    value and raise :class:`EmptyGatedSet`.
    """
    return aggregate_values(gated_values(series, key, predicate, window), op)


def aggregate_values(values: list[float], op: str) -> float:
    if op not in AGGREGATE_OPS:
        raise SpecError(f"unknown aggregate op {op!r}")
    if op == "sum":
        return float(sum(values))
    if not values:
        raise EmptyGatedSet(f"aggregate {op!r} over zero gated values")
    if op == "max":
        return float(max(values))
    if op == "min":
        return float(min(values))
    return float(sum(values) / len(values))
