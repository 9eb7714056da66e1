"""Incident pattern injection with exact ground-truth manifests.

Patterns perturb an already-assembled dataset inside a declared window
and return a new dataset plus an :class:`IncidentManifest` recording
exactly which (entity, key, window) slices were touched.  Records
outside every affected window are reused untouched, bit for bit.

Magnitudes are expressed in multiples of each target's own baseline
standard deviation, computed over the seven epochs (or the full prefix,
if shorter) immediately preceding the incident window.  Two exceptions:
``data_gap`` interprets magnitude as a per-record drop probability in
(0, 1], and ``flash_crowd`` as an entity-count multiplier.

Cascades chain stages across entity populations: each downstream
stage's candidates are selected by a linkage relation from the previous
stage's affected entities, and each stage's window is shifted by its
declared lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (Dataset, EntityRef, GlobalWindow, MeasurementRecord,
                   StaticProfile, TimeSeries)
from .errors import (BrokenLinkage, NoTargets, SpecError, WindowOutOfRange)
from .filters import EntityFilter

PATTERN_KINDS = ("spike", "dip", "slow_growth", "data_gap",
                 "kpi_degradation", "flash_crowd")

BASELINE_EPOCHS = 7


@dataclass(frozen=True)
class PatternSpec:
    kind: str
    target_filter: EntityFilter
    keys: tuple[str, ...]
    window: GlobalWindow
    magnitude: float

    def __post_init__(self) -> None:
        if self.kind not in PATTERN_KINDS:
            raise SpecError(f"unknown pattern kind {self.kind!r}")
        if self.magnitude <= 0:
            raise SpecError("pattern magnitude must be positive")
        if self.kind == "data_gap" and self.magnitude > 1.0:
            raise SpecError("data_gap magnitude is a probability in (0, 1]")
        if self.kind != "flash_crowd" and not self.keys:
            raise SpecError(f"pattern kind {self.kind!r} needs target keys")


@dataclass(frozen=True)
class Linkage:
    """Relates downstream entities to upstream affected entities.

    A downstream entity is selected when its ``downstream_key`` value
    appears among the upstream affected entities' ``upstream_key``
    values.  Either key may be a static attribute name or the pseudo
    key ``entity_id``; identity linkage is entity_id to entity_id.
    """

    upstream_key: str = "entity_id"
    downstream_key: str = "entity_id"


@dataclass(frozen=True)
class CascadeStage:
    pattern: PatternSpec
    lag_ms: int = 0
    linkage: Linkage | None = None  # required for every stage after the first


@dataclass(frozen=True)
class CascadeSpec:
    stages: tuple[CascadeStage, ...]

    def __post_init__(self) -> None:
        if len(self.stages) < 2:
            raise SpecError("a cascade needs at least two stages")
        lags = [s.lag_ms for s in self.stages]
        if any(b < a for a, b in zip(lags, lags[1:])):
            raise SpecError("cascade lags must be nondecreasing")
        if any(s.linkage is None for s in self.stages[1:]):
            raise SpecError("every stage after the first needs a linkage")


@dataclass(frozen=True)
class AffectedSlice:
    entity_id: str
    keys: tuple[str, ...]
    window: GlobalWindow


@dataclass(frozen=True)
class BaselineStat:
    entity_id: str
    key: str
    mean: float
    std: float


@dataclass(frozen=True)
class IncidentManifest:
    incident_id: str
    kind: str
    magnitude: float
    affected: tuple[AffectedSlice, ...]
    baseline_window: GlobalWindow
    baseline_stats: tuple[BaselineStat, ...]

    def affected_entity_ids(self) -> tuple[str, ...]:
        seen = []
        for slc in self.affected:
            if slc.entity_id not in seen:
                seen.append(slc.entity_id)
        return tuple(seen)

    def stat_for(self, entity_id: str, key: str) -> BaselineStat | None:
        for st in self.baseline_stats:
            if st.entity_id == entity_id and st.key == key:
                return st
        return None


def baseline_window_for(dataset: Dataset,
                        incident: GlobalWindow) -> GlobalWindow:
    """The span of the last seven epochs that end at or before the
    incident starts; falls back to everything between the horizon start
    and the incident when no whole epoch precedes it."""
    preceding = [w for _, w in dataset.epoch_index
                 if w.end_ms <= incident.start_ms]
    if preceding:
        chosen = preceding[-BASELINE_EPOCHS:]
        return GlobalWindow(chosen[0].start_ms, chosen[-1].end_ms)
    horizon = dataset.horizon()
    if horizon is None or horizon.start_ms >= incident.start_ms:
        raise WindowOutOfRange(
            "no baseline period exists before the incident window")
    return GlobalWindow(horizon.start_ms, incident.start_ms)


def _numeric_values(series: TimeSeries, key: str,
                    window: GlobalWindow) -> list[float]:
    out = []
    for rec in series.records:
        if rec.timestamp >= window.end_ms:
            break
        if rec.timestamp < window.start_ms:
            continue
        v = rec.payload.get(key)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(float(v))
    return out


def _mean_std(values: list[float]) -> tuple[float, float]:
    mean = float(np.mean(values))
    std = float(np.sqrt(np.mean([(v - mean) ** 2 for v in values])))
    return mean, std


def _entity_index(dataset: Dataset) -> dict[str, tuple[str, TimeSeries]]:
    return {series.entity.entity_id: (table, series)
            for table, series in dataset.all_series()}


def _select_targets(dataset: Dataset, pattern: PatternSpec,
                    window: GlobalWindow,
                    candidate_ids: set[str] | None) -> list[tuple[str, TimeSeries]]:
    """Entities matching the filter that actually have in-window records."""
    targets = []
    matched_any = False
    for table, series in dataset.all_series():
        if candidate_ids is not None \
                and series.entity.entity_id not in candidate_ids:
            continue
        if not pattern.target_filter.matches(series.entity.entity_id,
                                             series.entity.entity_type,
                                             series.profile.values):
            continue
        matched_any = True
        if any(window.contains(r.timestamp) for r in series.records):
            targets.append((table, series))
    if not targets:
        detail = ("filter matched no entity" if not matched_any
                  else "no matched entity has records in the window")
        raise NoTargets(f"{pattern.kind}: {detail}")
    return targets


def _apply_value_shift(series: TimeSeries, keys: tuple[str, ...],
                       window: GlobalWindow, deltas: Mapping[str, float],
                       ramp: bool) -> TimeSeries:
    records = []
    for rec in series.records:
        if not window.contains(rec.timestamp):
            records.append(rec)
            continue
        payload = dict(rec.payload)
        changed = False
        for key in keys:
            v = payload.get(key)
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                scale = 1.0
                if ramp:
                    scale = (rec.timestamp - window.start_ms) / window.length_ms
                payload[key] = float(v) + deltas[key] * scale
                changed = True
        if changed:
            records.append(MeasurementRecord(rec.entity_id, rec.timestamp,
                                             payload, rec.state_label))
        else:
            records.append(rec)
    return TimeSeries(series.entity, series.profile, tuple(records))


def _apply_gap(series: TimeSeries, keys: tuple[str, ...], window: GlobalWindow,
               drop_p: float, rng: np.random.Generator) -> TimeSeries:
    records = []
    for rec in series.records:
        if not window.contains(rec.timestamp):
            records.append(rec)
            continue
        payload = dict(rec.payload)
        changed = False
        for key in keys:
            if key in payload and rng.random() < drop_p:
                del payload[key]
                changed = True
        if not changed:
            records.append(rec)
        elif payload:
            records.append(MeasurementRecord(rec.entity_id, rec.timestamp,
                                             payload, rec.state_label))
        # a record whose whole payload was dropped disappears entirely
    return TimeSeries(series.entity, series.profile, tuple(records))


def inject(dataset: Dataset, pattern: PatternSpec, rng: np.random.Generator,
           incident_id: str | None = None) -> tuple[Dataset, IncidentManifest]:
    """Apply one pattern; returns the perturbed dataset and its manifest."""
    new_dataset, affected, stats, baseline = _inject_stage(
        dataset, pattern, pattern.window, None, rng)
    manifest = IncidentManifest(
        incident_id=incident_id or f"{pattern.kind}-{pattern.window.start_ms}",
        kind=pattern.kind,
        magnitude=pattern.magnitude,
        affected=tuple(affected),
        baseline_window=baseline,
        baseline_stats=tuple(stats),
    )
    return _with_manifest(new_dataset, manifest), manifest


def inject_cascade(dataset: Dataset, cascade: CascadeSpec,
                   rng: np.random.Generator,
                   incident_id: str | None = None
                   ) -> tuple[Dataset, IncidentManifest]:
    """Apply a multi-stage cascade as one incident.

    Stage k's window is its declared window shifted by its lag; its
    candidate entities come from the linkage applied to stage k-1's
    affected entities.  Raises :class:`BrokenLinkage` when a downstream
    stage resolves to zero entities.
    """
    current = dataset
    all_affected: list[AffectedSlice] = []
    all_stats: list[BaselineStat] = []
    first_baseline: GlobalWindow | None = None
    upstream: list[EntityRef] | None = None
    for idx, stage in enumerate(cascade.stages):
        window = stage.pattern.window.shifted(stage.lag_ms)
        candidate_ids: set[str] | None = None
        if idx > 0:
            assert stage.linkage is not None and upstream is not None
            candidate_ids = _linked_ids(current, stage.linkage, upstream)
            if not candidate_ids:
                raise BrokenLinkage(
                    f"stage {idx} linkage selected no downstream entities")
        try:
            current, affected, stats, baseline = _inject_stage(
                current, stage.pattern, window, candidate_ids, rng)
        except NoTargets as exc:
            if idx > 0:
                raise BrokenLinkage(
                    f"stage {idx} resolved to zero usable entities") from exc
            raise
        if first_baseline is None:
            first_baseline = baseline
        all_affected.extend(affected)
        all_stats.extend(stats)
        index = _entity_index(current)
        upstream = [index[s.entity_id][1].entity for s in affected]
    assert first_baseline is not None
    manifest = IncidentManifest(
        incident_id=incident_id or
        f"cascade-{cascade.stages[0].pattern.window.start_ms}",
        kind="cascade",
        magnitude=cascade.stages[0].pattern.magnitude,
        affected=tuple(all_affected),
        baseline_window=first_baseline,
        baseline_stats=tuple(all_stats),
    )
    return _with_manifest(current, manifest), manifest


def _linked_ids(dataset: Dataset, linkage: Linkage,
                upstream: list[EntityRef]) -> set[str]:
    index = _entity_index(dataset)
    upstream_values = set()
    for ref in upstream:
        if linkage.upstream_key == "entity_id":
            upstream_values.add(ref.entity_id)
        else:
            _, series = index[ref.entity_id]
            v = series.profile.get(linkage.upstream_key)
            if v is not None:
                upstream_values.add(v)
    upstream_ids = {ref.entity_id for ref in upstream}
    linked = set()
    for _, series in dataset.all_series():
        eid = series.entity.entity_id
        if eid in upstream_ids:
            continue
        value = eid if linkage.downstream_key == "entity_id" \
            else series.profile.get(linkage.downstream_key)
        if value is not None and value in upstream_values:
            linked.add(eid)
    if linkage.upstream_key == "entity_id" and \
            linkage.downstream_key == "entity_id":
        linked = upstream_ids  # identity linkage keeps the same entities
    return linked


def _inject_stage(dataset: Dataset, pattern: PatternSpec, window: GlobalWindow,
                  candidate_ids: set[str] | None, rng: np.random.Generator
                  ) -> tuple[Dataset, list[AffectedSlice], list[BaselineStat],
                             GlobalWindow]:
    horizon = dataset.horizon()
    if horizon is None:
        raise NoTargets("dataset has no records")
    if window.start_ms < horizon.start_ms or window.end_ms > horizon.end_ms:
        raise WindowOutOfRange(
            f"incident window [{window.start_ms}, {window.end_ms}) exceeds "
            f"the dataset horizon [{horizon.start_ms}, {horizon.end_ms})")
    baseline = baseline_window_for(dataset, window)
    targets = _select_targets(dataset, pattern, window, candidate_ids)

    if pattern.kind == "flash_crowd":
        return _inject_flash_crowd(dataset, pattern, window, targets,
                                   baseline)

    affected: list[AffectedSlice] = []
    stats: list[BaselineStat] = []
    replacements: dict[str, TimeSeries] = {}
    for _, series in targets:
        usable_keys = []
        deltas = {}
        for key in pattern.keys:
            base_values = _numeric_values(series, key, baseline)
            if pattern.kind == "data_gap":
                # Gaps may drop categorical keys too; baseline stats are
                # recorded only where they are defined.
                has_window_data = any(key in r.payload for r in series.records
                                      if window.contains(r.timestamp))
                if not has_window_data:
                    continue
                usable_keys.append(key)
                if base_values:
                    mean, std = _mean_std(base_values)
                    stats.append(BaselineStat(series.entity.entity_id, key,
                                              mean, std))
                continue
            window_values = _numeric_values(series, key, window)
            if not base_values or not window_values:
                continue
            mean, std = _mean_std(base_values)
            usable_keys.append(key)
            stats.append(BaselineStat(series.entity.entity_id, key, mean, std))
            if pattern.kind == "dip":
                deltas[key] = -pattern.magnitude * std
            else:
                deltas[key] = pattern.magnitude * std
        if not usable_keys:
            continue
        keys = tuple(usable_keys)
        if pattern.kind == "data_gap":
            new_series = _apply_gap(series, keys, window, pattern.magnitude, rng)
        else:
            new_series = _apply_value_shift(
                series, keys, window, deltas,
                ramp=(pattern.kind == "slow_growth"))
        replacements[series.entity.entity_id] = new_series
        affected.append(AffectedSlice(series.entity.entity_id, keys, window))
    if not affected:
        raise NoTargets(
            f"{pattern.kind}: no target has both baseline and in-window "
            f"values for keys {pattern.keys!r}")
    tables = {
        table: tuple(replacements.get(s.entity.entity_id, s) for s in rows)
        for table, rows in dataset.tables.items()}
    new_dataset = Dataset(dataset.name, tables, dataset.epoch_index,
                          dataset.manifests)
    return new_dataset, affected, stats, baseline


def _inject_flash_crowd(dataset: Dataset, pattern: PatternSpec,
                        window: GlobalWindow,
                        targets: list[tuple[str, TimeSeries]],
                        baseline: GlobalWindow
                        ) -> tuple[Dataset, list[AffectedSlice],
                                   list[BaselineStat], GlobalWindow]:
    """Clone extra copies of target entities, active only in the window."""
    n_new = max(1, int(math.floor(pattern.magnitude * len(targets))))
    additions: dict[str, list[TimeSeries]] = {}
    affected: list[AffectedSlice] = []
    stats: list[BaselineStat] = []
    for i in range(n_new):
        table, source = targets[i % len(targets)]
        clone_id = f"{source.entity.entity_id}-fc{i + 1:02d}"
        records = tuple(
            MeasurementRecord(clone_id, r.timestamp, r.payload, r.state_label)
            for r in source.records if window.contains(r.timestamp))
        clone = TimeSeries(EntityRef(clone_id, source.entity.entity_type),
                           StaticProfile(dict(source.profile.values)), records)
        additions.setdefault(table, []).append(clone)
        keys = pattern.keys or tuple(sorted({k for r in records
                                             for k in r.payload}))
        affected.append(AffectedSlice(clone_id, keys, window))
        for key in keys:
            base_values = _numeric_values(source, key, baseline)
            if base_values:
                mean, std = _mean_std(base_values)
                stats.append(BaselineStat(clone_id, key, mean, std))
    tables = {}
    for table, rows in dataset.tables.items():
        extra = additions.get(table, [])
        tables[table] = tuple(sorted(list(rows) + extra,
                                     key=lambda s: s.entity.entity_id))
    new_dataset = Dataset(dataset.name, tables, dataset.epoch_index,
                          dataset.manifests)
    return new_dataset, affected, stats, baseline


def _with_manifest(dataset: Dataset,
                   manifest: IncidentManifest) -> Dataset:
    return Dataset(dataset.name, dataset.tables, dataset.epoch_index,
                   dataset.manifests + (manifest,))
