"""Baseline-relative deviation analyses.

Incident questions compare in-window behavior against a declared
baseline window, entirely from the data: a query carries its own
baseline window, so exported queries re-evaluate without access to any
injection manifest.

An entity "deviates" on a key when the absolute difference between its
in-window mean and its baseline mean is at least ``threshold_sigmas``
baseline standard deviations.  Entities lacking data on either side are
simply not deviant.  A zero baseline std counts any nonzero mean change
as a deviation.
"""

from __future__ import annotations

from ..core import GlobalWindow, TimeSeries
from ..errors import EmptyWindowData
from .stateless import numeric_values


def deviation_sigmas(series: TimeSeries, key: str, window: GlobalWindow,
                     baseline: GlobalWindow) -> float | None:
    """Signed mean shift in units of baseline std, or None if either
    window has no values for the key."""
    base = numeric_values(series, key, baseline)
    current = numeric_values(series, key, window)
    if not base or not current:
        return None
    base_mean = sum(base) / len(base)
    variance = sum((v - base_mean) ** 2 for v in base) / len(base)
    std = variance ** 0.5
    shift = sum(current) / len(current) - base_mean
    if std == 0.0:
        if shift == 0.0:
            return 0.0
        return float("inf") if shift > 0 else float("-inf")
    return shift / std


def is_deviant(series: TimeSeries, key: str, window: GlobalWindow,
               baseline: GlobalWindow, threshold_sigmas: float) -> bool:
    sig = deviation_sigmas(series, key, window, baseline)
    return sig is not None and abs(sig) >= threshold_sigmas


def deviation_exists(series_list: list[TimeSeries], key: str,
                     window: GlobalWindow, baseline: GlobalWindow,
                     threshold_sigmas: float) -> bool:
    """True when any selected entity deviates on the key."""
    return any(is_deviant(s, key, window, baseline, threshold_sigmas)
               for s in series_list)


def deviation_count(series_list: list[TimeSeries], key: str,
                    window: GlobalWindow, baseline: GlobalWindow,
                    threshold_sigmas: float) -> int:
    """How many selected entities deviate on the key."""
    return sum(1 for s in series_list
               if is_deviant(s, key, window, baseline, threshold_sigmas))


def extreme_entity(series_list: list[TimeSeries], key: str,
                   window: GlobalWindow, mode: str = "max") -> str:
    """Entity id with the highest (or lowest) in-window mean of the key.

    Ties break toward the lexicographically smaller id.  Entities with
    no in-window values are skipped; if all are, there is no answer.
    """
    best_id: str | None = None
    best_mean = 0.0
    for series in series_list:
        values = numeric_values(series, key, window)
        if not values:
            continue
        mean = sum(values) / len(values)
        better = False
        if best_id is None:
            better = True
        elif mode == "min":
            better = (mean, series.entity.entity_id) < (best_mean, best_id)
        else:
            better = (mean > best_mean) or \
                (mean == best_mean and series.entity.entity_id < best_id)
        if better:
            best_id = series.entity.entity_id
            best_mean = mean
    if best_id is None:
        raise EmptyWindowData(f"no entity has in-window values for {key!r}")
    return best_id
