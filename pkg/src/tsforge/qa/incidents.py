"""Incident questions derived from injection manifests.

The manifest records exactly which entities, keys and windows an
injected disturbance touched.  From that we derive queries that are
answerable from the data alone: every derived query carries its own
baseline window and detection threshold, so re-evaluating an exported
item needs no manifest.

The detection threshold for a stage is half the smallest observed
per-entity shift (in baseline standard deviations) among the entities
the manifest lists, floored at 0.5.  Affected entities therefore clear
the threshold with margin while healthy ones, whose in-window means
wander by a fraction of a standard deviation, stay below it.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Dataset, GlobalWindow, TimeSeries
from ..filters import Condition, EntityFilter
from ..patterns import IncidentManifest
from ..query.evaluate import evaluate
from ..query.incident import deviation_sigmas
from ..query.spec import AnalysisSpec, QueryResult, QuerySpec
from .facts import DatasetFacts


@dataclass(frozen=True)
class StageGroup:
    """Affected slices of one manifest sharing a window and entity type."""
    entity_type: str
    window: GlobalWindow
    entity_ids: tuple[str, ...]
    keys: tuple[str, ...]


@dataclass(frozen=True)
class DerivedQuery:
    query: QuerySpec
    answer: QueryResult
    incident_id: str
    label: str


def _series_by_id(dataset: Dataset) -> dict[str, TimeSeries]:
    return {s.entity.entity_id: s for _t, s in dataset.all_series()}

def _type_filter(etype: str) -> EntityFilter:
    return EntityFilter((Condition("entity_type", "=", etype),))

def _id_filter(eid: str) -> EntityFilter:
    return EntityFilter((Condition("entity_id", "=", eid),))


def stage_groups(manifest: IncidentManifest,
                 dataset: Dataset) -> list[StageGroup]:
    by_id = _series_by_id(dataset)
    grouped: dict[tuple, dict] = {}
    for sl in manifest.affected:
        series = by_id.get(sl.entity_id)
        if series is None:
            continue
        etype = series.entity.entity_type
        bucket = grouped.setdefault(
            (sl.window.start_ms, sl.window.end_ms, etype),
            {"window": sl.window, "etype": etype, "ids": [], "keys": set()})
        bucket["ids"].append(sl.entity_id)
        bucket["keys"].update(sl.keys)
    groups = []
    for _, b in sorted(grouped.items()):
        groups.append(StageGroup(b["etype"], b["window"],
                                 tuple(sorted(b["ids"])),
                                 tuple(sorted(b["keys"]))))
    return groups


def _statted_key(manifest: IncidentManifest, group: StageGroup) -> str | None:
    """First key of the group for which baseline statistics exist."""
    for key in group.keys:
        for eid in group.entity_ids:
            if manifest.stat_for(eid, key) is not None:
                return key
    return None


def stage_threshold(dataset: Dataset, manifest: IncidentManifest,
                    group: StageGroup, key: str) -> tuple[float, float]:
    """(threshold_sigmas, mean signed shift) for a stage group."""
    by_id = _series_by_id(dataset)
    sigmas = []
    for eid in group.entity_ids:
        series = by_id.get(eid)
        if series is None:
            continue
        sig = deviation_sigmas(series, key, group.window,
                               manifest.baseline_window)
        if sig is not None:
            sigmas.append(sig)
    finite = [abs(s) for s in sigmas if abs(s) != float("inf")]
    if finite:
        threshold = max(0.5, round(min(finite) / 2.0, 2))
    else:
        threshold = max(0.5, manifest.magnitude / 2.0)
    direction = sum(1 if s > 0 else -1 for s in sigmas) if sigmas else 1
    return threshold, float(direction)


def _dev_analysis(kind: str, key: str, baseline: GlobalWindow,
                  threshold: float) -> AnalysisSpec:
    return AnalysisSpec(kind, {"key": key, "baseline": baseline,
                               "threshold_sigmas": threshold})


def derive_incident_queries(dataset: Dataset, manifest: IncidentManifest,
                            ) -> list[DerivedQuery]:
    """Base questions for each stage: existence, affected count, worst
    entity and an in-window KPI statistic."""
    out: list[DerivedQuery] = []
    for group in stage_groups(manifest, dataset):
        key = _statted_key(manifest, group)
        if key is None:
            continue
        threshold, direction = stage_threshold(dataset, manifest, group, key)
        tfil = _type_filter(group.entity_type)
        existence = QuerySpec(tfil, {}, _dev_analysis(
            "deviation_exists", key, manifest.baseline_window, threshold),
            group.window)
        count = QuerySpec(tfil, {}, _dev_analysis(
            "deviation_count", key, manifest.baseline_window, threshold),
            group.window)
        mode = "max" if direction >= 0 else "min"
        worst = QuerySpec(tfil, {}, AnalysisSpec(
            "extreme_entity", {"key": key, "mode": mode}), group.window)
        kpi = QuerySpec(_id_filter(group.entity_ids[0]), {}, AnalysisSpec(
            "windowed_statistic", {"key": key, "stat": "mean"}), group.window)
        for label, q in (("existence", existence), ("affected_count", count),
                         ("worst_entity", worst), ("kpi_mean", kpi)):
            out.append(DerivedQuery(q, evaluate(q, dataset),
                                    manifest.incident_id, label))
    return out


def derive_incident_variants(dataset: Dataset, manifest: IncidentManifest,
                             facts: DatasetFacts) -> list[DerivedQuery]:
    """Contrast questions built around the first stage of a manifest.

    A baseline-shifted window, an untouched key, and an unaffected
    entity each yield an existence question whose expected answer is
    negative; the chained variant conditions a downstream count on the
    upstream stage actually deviating.
    """
    groups = stage_groups(manifest, dataset)
    usable = [(g, _statted_key(manifest, g)) for g in groups]
    usable = [(g, k) for g, k in usable if k is not None]
    if not usable:
        return []
    g0, k0 = usable[0]
    t0, _ = stage_threshold(dataset, manifest, g0, k0)
    base = manifest.baseline_window
    out: list[DerivedQuery] = []

    span = min(g0.window.length_ms, base.length_ms)
    shifted = GlobalWindow(base.end_ms - span, base.end_ms)
    q_shift = QuerySpec(_type_filter(g0.entity_type), {}, _dev_analysis(
        "deviation_exists", k0, base, t0), shifted)
    out.append(DerivedQuery(q_shift, evaluate(q_shift, dataset),
                            manifest.incident_id, "baseline_shifted"))

    touched = {k for g in groups for k in g.keys}
    spare = [k for k in facts.numeric_keys.get(g0.entity_type, ())
             if k not in touched]
    if spare:
        q_key = QuerySpec(_type_filter(g0.entity_type), {}, _dev_analysis(
            "deviation_exists", spare[0], base, t0), g0.window)
        out.append(DerivedQuery(q_key, evaluate(q_key, dataset),
                                manifest.incident_id, "untouched_key"))

    affected_ids = set(manifest.affected_entity_ids())
    bystanders = [eid for eid in facts.entity_ids.get(g0.entity_type, ())
                  if eid not in affected_ids]
    by_id = _series_by_id(dataset)
    bystanders = [eid for eid in bystanders
                  if deviation_sigmas(by_id[eid], k0, g0.window, base)
                  is not None]
    if bystanders:
        q_clean = QuerySpec(_id_filter(bystanders[0]), {}, _dev_analysis(
            "deviation_exists", k0, base, t0), g0.window)
        out.append(DerivedQuery(q_clean, evaluate(q_clean, dataset),
                                manifest.incident_id, "unaffected_entity"))

    g1, k1 = usable[1] if len(usable) > 1 else (g0, k0)
    t1, _ = stage_threshold(dataset, manifest, g1, k1)
    inner = _dev_analysis("deviation_count", k1, base, t1)
    chained = AnalysisSpec("chained", {
        "guard_filter": _type_filter(g0.entity_type),
        "guard_key": k0,
        "guard_baseline": base,
        "guard_threshold_sigmas": t0,
        "guard_window": g0.window,
        "inner": inner,
    })
    q_chain = QuerySpec(_type_filter(g1.entity_type), {}, chained, g1.window)
    out.append(DerivedQuery(q_chain, evaluate(q_chain, dataset),
                            manifest.incident_id, "chained"))
    return out


def incident_pool(dataset: Dataset, facts: DatasetFacts) -> list[DerivedQuery]:
    """Ordered pool of derived incident questions across all manifests.

    The first stage's base questions come first, then the contrast
    variants, then the remaining stages, so a truncated draw still
    exercises every question family.
    """
    pool: list[DerivedQuery] = []
    for manifest in dataset.manifests:
        bases = derive_incident_queries(dataset, manifest)
        variants = derive_incident_variants(dataset, manifest, facts)
        pool.extend(bases[:4])
        pool.extend(variants)
        pool.extend(bases[4:])
    return pool
