"""Order-sensitive analyses over windowed records.

These depend on event ordering within a series: pairing, subsequence
matching, triggers, funnels, drift, and oscillation.  Everything here
operates on one entity's records; cross-entity composition lives in the
evaluator.
"""

from __future__ import annotations

from bisect import bisect_left

from ..core import GlobalWindow, TimeSeries, slice_series
from ..errors import NoDenominator, NoPairs, SpecError
from ..filters import EventPredicate
from .stateless import pooled_statistic


def matched_pairs(series: TimeSeries, first: EventPredicate,
                  second: EventPredicate,
                  window: GlobalWindow) -> list[tuple[int, int]]:
    """Greedy one-to-one pairing: each ``first`` event matches the
    earliest subsequent unmatched ``second`` event.

    A record that could play both roles completes a pending pair first;
    otherwise it opens one.  It never pairs with itself.
    """
    pairs: list[tuple[int, int]] = []
    open_firsts: list[int] = []
    for rec in slice_series(series, window).records:
        is_second = second.matches(rec.payload)
        if is_second and open_firsts:
            pairs.append((open_firsts.pop(0), rec.timestamp))
            continue
        if first.matches(rec.payload):
            open_firsts.append(rec.timestamp)
    return pairs


def avg_time_between(series: TimeSeries, first: EventPredicate,
                     second: EventPredicate, window: GlobalWindow) -> float:
    """Mean gap in ms over matched pairs; raises NoPairs when none."""
    pairs = matched_pairs(series, first, second, window)
    if not pairs:
        raise NoPairs("no (first, second) event pairs in the window")
    return sum(b - a for a, b in pairs) / len(pairs)


def sequence_match(series: TimeSeries, steps: list[EventPredicate],
                   window: GlobalWindow,
                   inter_step_max_ms: list[float | None] | None = None) -> bool:
    """Does the series contain the steps as a subsequence?

    Matched records need strictly increasing timestamps; intervening
    records are ignored.  ``inter_step_max_ms[i]`` optionally bounds the
    gap between matched steps i and i+1.
    """
    if not steps:
        raise SpecError("sequence_match needs at least one step")
    gaps = inter_step_max_ms or [None] * (len(steps) - 1)
    if len(gaps) != len(steps) - 1:
        raise SpecError("inter_step_max_ms must have len(steps) - 1 entries")
    records = slice_series(series, window).records
    # Feasible match times per step, built left to right.  A step-i time
    # is feasible when some feasible step-(i-1) time lies strictly before
    # it and within the declared gap.
    feasible: list[int] = sorted({r.timestamp for r in records
                                  if steps[0].matches(r.payload)})
    for i in range(1, len(steps)):
        if not feasible:
            return False
        candidates = sorted({r.timestamp for r in records
                             if steps[i].matches(r.payload)})
        gap = gaps[i - 1]
        nxt = []
        for t in candidates:
            lo = 0 if gap is None else bisect_left(feasible, t - gap)
            hi = bisect_left(feasible, t)
            if hi > lo:
                nxt.append(t)
        feasible = nxt
    return bool(feasible)


def count_after_trigger(series: TimeSeries, trigger: EventPredicate,
                        target: EventPredicate, window: GlobalWindow) -> int:
    """Target events strictly after the first in-window trigger; zero
    when the trigger never fires."""
    records = slice_series(series, window).records
    trigger_t = None
    for rec in records:
        if trigger.matches(rec.payload):
            trigger_t = rec.timestamp
            break
    if trigger_t is None:
        return 0
    return sum(1 for rec in records
               if rec.timestamp > trigger_t and target.matches(rec.payload))


def conversion_rate(series_list: list[TimeSeries], first: EventPredicate,
                    second: EventPredicate, window: GlobalWindow) -> float:
    """Fraction of entities with a ``first`` event that later produced a
    ``second`` event (strictly after, within the window)."""
    denominator = 0
    numerator = 0
    for series in series_list:
        records = slice_series(series, window).records
        if not any(first.matches(r.payload) for r in records):
            continue
        denominator += 1
        if sequence_match(series, [first, second], window):
            numerator += 1
    if denominator == 0:
        raise NoDenominator("no entity produced the first event")
    return numerator / denominator


def cross_window_compare(series_list: list[TimeSeries], key: str,
                         window_before: GlobalWindow,
                         window_after: GlobalWindow) -> float:
    """mean(after) - mean(before) for one key, pooled across entities."""
    before = pooled_statistic(series_list, key, window_before, "mean")
    after = pooled_statistic(series_list, key, window_after, "mean")
    return after - before


def alternating_pattern_count(series: TimeSeries, first: EventPredicate,
                              second: EventPredicate,
                              window: GlobalWindow) -> int:
    """Completed first -> second -> first cycles.

    Records are projected to labels (``first`` wins when both match),
    consecutive duplicates collapse, and each return to ``first`` after
    a ``second`` closes one cycle and opens the next.
    """
    labels = []
    for rec in slice_series(series, window).records:
        if first.matches(rec.payload):
            labels.append("a")
        elif second.matches(rec.payload):
            labels.append("b")
    collapsed = [labels[0]] if labels else []
    for lab in labels[1:]:
        if lab != collapsed[-1]:
            collapsed.append(lab)
    cycles = 0
    progress = 0  # 0: waiting for a, 1: saw a, 2: saw a then b
    for lab in collapsed:
        if progress == 0 and lab == "a":
            progress = 1
        elif progress == 1 and lab == "b":
            progress = 2
        elif progress == 2 and lab == "a":
            cycles += 1
            progress = 1
    return cycles
