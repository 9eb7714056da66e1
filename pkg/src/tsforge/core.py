"""Core timeseries data model.

Timestamps are integer epoch milliseconds, UTC.  Windows are half-open:
``start_ms`` is inside, ``end_ms`` is not.  All types here are immutable
after construction and every operation is pure; mutation means building
a new value.

A record's payload is a partial map: a key that is absent was simply not
observed at that instant, and predicates treat it as failing every
comparison.  ``state_label`` carries generator ground truth and is
withheld from agent-facing exports.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Mapping

from .errors import SpecError
from .filters import EventPredicate

if TYPE_CHECKING:  # avoids a runtime import cycle with patterns
    from .patterns import IncidentManifest

AttrValue = Any  # str | int | float | bool
PayloadValue = Any  # str | int | float


@dataclass(frozen=True)
class EntityRef:
    entity_id: str
    entity_type: str


@dataclass(frozen=True)
class StaticProfile:
    """Immutable per-entity attributes (plan tier, region, firmware...)."""

    values: Mapping[str, AttrValue] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)


@dataclass(frozen=True)
class MeasurementRecord:
    entity_id: str
    timestamp: int
    payload: Mapping[str, PayloadValue]
    state_label: str | None = None

    def __post_init__(self) -> None:
        if not self.payload:
            raise SpecError("measurement payload must be non-empty")


@dataclass(frozen=True)
class TimeSeries:
    """All records of one entity, ordered by nondecreasing timestamp.

    Equal timestamps are permitted; two observations may legitimately
    land on the same millisecond.
    """

    entity: EntityRef
    profile: StaticProfile
    records: tuple[MeasurementRecord, ...] = ()

    def __post_init__(self) -> None:
        last = None
        for rec in self.records:
            if rec.entity_id != self.entity.entity_id:
                raise SpecError(
                    f"record entity_id {rec.entity_id!r} does not match "
                    f"series entity {self.entity.entity_id!r}")
            if last is not None and rec.timestamp < last:
                raise SpecError("series timestamps must be nondecreasing")
            last = rec.timestamp


@dataclass(frozen=True)
class GlobalWindow:
    """Half-open absolute time range [start_ms, end_ms)."""

    start_ms: int
    end_ms: int

    def __post_init__(self) -> None:
        if self.end_ms <= self.start_ms:
            raise SpecError(
                f"window end {self.end_ms} must exceed start {self.start_ms}")

    @property
    def length_ms(self) -> int:
        return self.end_ms - self.start_ms

    def contains(self, t: int) -> bool:
        return self.start_ms <= t < self.end_ms

    def overlaps(self, other: "GlobalWindow") -> bool:
        return self.start_ms < other.end_ms and other.start_ms < self.end_ms

    def shifted(self, lag_ms: int) -> "GlobalWindow":
        return GlobalWindow(self.start_ms + lag_ms, self.end_ms + lag_ms)


@dataclass(frozen=True)
class PredicatedWindow:
    """Windows anchored on records matching a predicate.

    Resolution yields one global window ``[t, t + lookahead_ms)`` per
    matching record timestamp ``t``.  Overlapping anchors stay separate;
    they are not merged.
    """

    anchor: EventPredicate
    lookahead_ms: int

    def __post_init__(self) -> None:
        if self.lookahead_ms <= 0:
            raise SpecError("predicated window lookahead must be positive")


Window = GlobalWindow | PredicatedWindow


@dataclass(frozen=True)
class Dataset:
    name: str
    tables: Mapping[str, tuple[TimeSeries, ...]]
    epoch_index: tuple[tuple[str, GlobalWindow], ...] = ()
    manifests: tuple["IncidentManifest", ...] = ()

    def all_series(self) -> Iterable[tuple[str, TimeSeries]]:
        for table in sorted(self.tables):
            for series in self.tables[table]:
                yield table, series

    def horizon(self) -> GlobalWindow | None:
        """Span of the epoch index, or of the data when no epochs exist."""
        if self.epoch_index:
            return GlobalWindow(self.epoch_index[0][1].start_ms,
                                self.epoch_index[-1][1].end_ms)
        stamps = [r.timestamp for _, s in self.all_series() for r in s.records]
        if not stamps:
            return None
        return GlobalWindow(min(stamps), max(stamps) + 1)


@dataclass(frozen=True)
class Violation:
    """One validation finding: what rule broke and where."""

    kind: str
    where: str
    detail: str


def slice_series(series: TimeSeries, window: GlobalWindow) -> TimeSeries:
    """Records with start_ms <= timestamp < end_ms, order preserved."""
    stamps = [r.timestamp for r in series.records]
    lo = bisect_left(stamps, window.start_ms)
    hi = bisect_left(stamps, window.end_ms)
    return TimeSeries(series.entity, series.profile, series.records[lo:hi])


def resolve_predicated_window(series: TimeSeries,
                              window: PredicatedWindow) -> list[GlobalWindow]:
    """One [t, t+lookahead) window per anchor-matching record, unmerged."""
    out = []
    for rec in series.records:
        if window.anchor.matches(rec.payload):
            out.append(GlobalWindow(rec.timestamp,
                                    rec.timestamp + window.lookahead_ms))
    return out


def validate_dataset(dataset: Dataset,
                     schema: Mapping[str, Iterable[str]] | None = None
                     ) -> list[Violation]:
    """Check structural invariants; return all violations found.

    ``schema`` optionally maps entity_type to its declared attribute
    names, enabling the unknown-attribute check.
    """
    violations: list[Violation] = []
    seen_ids: dict[str, str] = {}
    epochs = dataset.epoch_index

    prev_end = None
    for i, (epoch_id, win) in enumerate(epochs):
        if prev_end is not None and win.start_ms < prev_end:
            violations.append(Violation(
                "epoch_overlap", f"epoch_index[{i}]",
                f"epoch {epoch_id!r} starts at {win.start_ms} before the "
                f"previous epoch ends at {prev_end}"))
        prev_end = win.end_ms if prev_end is None else max(prev_end, win.end_ms)

    for table in sorted(dataset.tables):
        for series in dataset.tables[table]:
            eid = series.entity.entity_id
            where = f"{table}/{eid}"
            if eid in seen_ids:
                violations.append(Violation(
                    "duplicate_entity", where,
                    f"entity {eid!r} already appears in {seen_ids[eid]!r}"))
            else:
                seen_ids[eid] = table
            if schema is not None:
                declared = schema.get(series.entity.entity_type)
                if declared is not None:
                    unknown = sorted(set(series.profile.values) - set(declared))
                    for key in unknown:
                        violations.append(Violation(
                            "unknown_attribute", where,
                            f"attribute {key!r} is not declared for type "
                            f"{series.entity.entity_type!r}"))
            last = None
            for j, rec in enumerate(series.records):
                if last is not None and rec.timestamp < last:
                    violations.append(Violation(
                        "unsorted_timestamps", f"{where}[{j}]",
                        f"timestamp {rec.timestamp} after {last}"))
                last = rec.timestamp
                if epochs and not any(w.contains(rec.timestamp)
                                      for _, w in epochs):
                    violations.append(Violation(
                        "epoch_gap", f"{where}[{j}]",
                        f"timestamp {rec.timestamp} is outside every epoch"))
    return violations
