"""A naive tree-walking query evaluator built on the brute-force oracles.

Mirrors the documented cross-entity aggregation contract (counts add,
existence checks OR, statistics pool, per-entity summaries average)
with straight-line loops, so disagreements with the real engine point
at genuine bugs rather than shared code.
"""

from __future__ import annotations

from typing import Any

from tsforge.core import Dataset, GlobalWindow, TimeSeries
from tsforge.errors import (EmptyWindowData, NeverReached, NoPairs,
                            QueryError)
from tsforge.query.spec import (AnalysisSpec, QueryResult, QuerySpec,
                                group_key_string)

import oracles as o

Scope = tuple[TimeSeries, GlobalWindow]


def _selected(dataset: Dataset, query: QuerySpec) -> list[TimeSeries]:
    return [s for _t, s in dataset.all_series()
            if o.filter_matches(query.entity_filter, s)]


def _scopes(series_list: list[TimeSeries], window) -> list[Scope]:
    if isinstance(window, GlobalWindow):
        return [(s, window) for s in series_list]
    out = []
    for s in series_list:
        for r in s.records:
            if o.pred_matches(window.anchor, r.payload):
                out.append((s, GlobalWindow(r.timestamp,
                                            r.timestamp + window.lookahead_ms)))
    return out


def ref_evaluate(query: QuerySpec, dataset: Dataset) -> QueryResult:
    selected = _selected(dataset, query)
    if not query.group_by:
        return _plain(query, selected, dataset)
    groups: dict[str, list[TimeSeries]] = {}
    for s in selected:
        key_parts = []
        complete = True
        for attr in query.group_by:
            v = s.entity.entity_type if attr == "entity_type" \
                else s.profile.get(attr)
            if v is None:
                complete = False
                break
            key_parts.append(v)
        if complete:
            groups.setdefault(group_key_string(tuple(key_parts)), []).append(s)
    values: dict[str, Any] = {}
    errors: dict[str, str] = {}
    for key in sorted(groups):
        try:
            values[key] = _plain(query, groups[key], dataset).value
        except QueryError as exc:
            errors[key] = type(exc).__name__
    return QueryResult("grouped", {"values": values, "errors": errors})


def _plain(query: QuerySpec, selected: list[TimeSeries],
           dataset: Dataset) -> QueryResult:
    scopes = _scopes(selected, query.window)
    return _analyze(query.analysis, query, scopes, selected, dataset)


def _analyze(analysis: AnalysisSpec, query: QuerySpec, scopes: list[Scope],
             selected: list[TimeSeries], dataset: Dataset) -> QueryResult:
    kind = analysis.kind
    p = dict(analysis.params)
    pred = query.predicate

    if kind == "event_count":
        return QueryResult.scalar(sum(
            o.o_event_count(s, pred(p["predicate"]), w) for s, w in scopes))

    if kind == "event_rate":
        return QueryResult.scalar(sum(
            o.o_event_rate(s, pred(p["predicate"]), w) for s, w in scopes))

    if kind == "windowed_statistic":
        pooled = [v for s, w in scopes for v in o.o_values(s, p["key"], w)]
        return QueryResult.scalar(o.o_stat(pooled, p["stat"], p.get("p")))

    if kind == "conditional_aggregate":
        gated = [v for s, w in scopes
                 for v in o.o_gated(s, p["key"], pred(p["predicate"]), w)]
        return QueryResult.scalar(o.o_aggregate(gated, p["op"]))

    if kind == "avg_time_between":
        pairs = [pair for s, w in scopes for pair in
                 o.o_matched_pairs(s, pred(p["first"]), pred(p["second"]), w)]
        if not pairs:
            raise NoPairs("nothing pairs")
        return QueryResult.scalar(o.o_mean([b - a for a, b in pairs]))

    if kind == "sequence_match":
        steps = [pred(name) for name in p["steps"]]
        gaps = p.get("inter_step_max_ms")
        return QueryResult.boolean(any(
            o.o_sequence_match(s, steps, w, gaps) for s, w in scopes))

    if kind == "count_after_trigger":
        return QueryResult.scalar(sum(
            o.o_count_after_trigger(s, pred(p["trigger"]), pred(p["target"]), w)
            for s, w in scopes))

    if kind == "conversion_rate":
        return QueryResult.scalar(o.o_conversion_rate(
            selected, pred(p["first"]), pred(p["second"]), query.window))

    if kind == "cross_window_compare":
        return QueryResult.scalar(o.o_cross_window_compare(
            selected, p["key"], p["window_before"], p["window_after"]))

    if kind == "alternating_pattern_count":
        return QueryResult.scalar(sum(
            o.o_alternating_count(s, pred(p["first"]), pred(p["second"]), w)
            for s, w in scopes))

    if kind in OCCUPANCY_KINDS:
        return _analyze_occupancy(kind, p, query, scopes)

    if kind == "deviation_exists":
        return QueryResult.boolean(any(
            o.o_is_deviant(s, p["key"], w, p["baseline"],
                           p["threshold_sigmas"]) for s, w in scopes))

    if kind == "deviation_count":
        deviant = {s.entity.entity_id for s, w in scopes
                   if o.o_is_deviant(s, p["key"], w, p["baseline"],
                                     p["threshold_sigmas"])}
        return QueryResult.scalar(len(deviant))

    if kind == "extreme_entity":
        return QueryResult.text(o.o_extreme_entity(
            selected, p["key"], query.window, p.get("mode", "max")))

    assert kind == "chained", kind
    guard_window = p.get("guard_window") or query.window
    guard_pop = [s for _t, s in dataset.all_series()
                 if o.filter_matches(p["guard_filter"], s)]
    fired = any(o.o_is_deviant(s, p["guard_key"], guard_window,
                               p["guard_baseline"], p["guard_threshold_sigmas"])
                for s in guard_pop)
    inner: AnalysisSpec = p["inner"]
    if not fired:
        if inner.kind in ("deviation_exists", "sequence_match",
                          "state_reached"):
            return QueryResult.boolean(False)
        return QueryResult.scalar(0)
    return _analyze(inner, query, scopes, selected, dataset)


OCCUPANCY_KINDS = frozenset({
    "state_reached", "entities_reached_count", "count_in_state",
    "state_duration", "first_passage_time", "transition_matrix",
    "common_paths", "loop_count", "occupancy_distribution", "kpi_in_state",
})


def _analyze_occupancy(kind: str, p: dict, query: QuerySpec,
                       scopes: list[Scope]) -> QueryResult:
    defs = list(p["state_defs"])
    preds = dict(query.event_predicates)
    built = [(s, w, o.o_occupancy(s, defs, preds, w)) for s, w in scopes]
    state = p.get("state")

    if kind == "state_reached":
        return QueryResult.boolean(any(
            o.o_state_reached(occ, state) for _s, _w, occ in built))

    if kind == "entities_reached_count":
        return QueryResult.scalar(len({
            s.entity.entity_id for s, _w, occ in built
            if o.o_state_reached(occ, state)}))

    if kind == "count_in_state":
        target = query.predicate(p["predicate"])
        return QueryResult.scalar(sum(
            o.o_count_in_state(s, occ, state, target, w)
            for s, w, occ in built))

    if kind == "state_duration":
        if not built:
            raise EmptyWindowData("nobody selected")
        per_entity = [o.o_state_duration(occ, state) for _s, _w, occ in built]
        return QueryResult.scalar(o.o_mean(per_entity))

    if kind == "first_passage_time":
        times = []
        for s, w, occ in built:
            t0 = p.get("t0_ms")
            if t0 is None:
                t0 = w.start_ms
            try:
                times.append(o.o_first_passage(occ, state, t0))
            except NeverReached:
                pass
        if not times:
            raise NeverReached("nobody gets there")
        return QueryResult.scalar(o.o_mean(times))

    if kind == "transition_matrix":
        states = [d.name for d in defs]
        rows = o.o_transition_matrix([occ for _s, _w, occ in built], states,
                                     p.get("normalize", True))
        return QueryResult("matrix", {"states": states, "rows": rows})

    if kind == "common_paths":
        ranked = o.o_common_paths([occ for _s, _w, occ in built],
                                  int(p["top_n"]), int(p["max_len"]))
        return QueryResult("paths", [[list(path), n] for path, n in ranked])

    if kind == "loop_count":
        return QueryResult.scalar(sum(
            o.o_loop_count(occ, state) for _s, _w, occ in built))

    if kind == "occupancy_distribution":
        return QueryResult("distribution", o.o_occupancy_distribution(
            [occ for _s, _w, occ in built]))

    assert kind == "kpi_in_state", kind
    kept = [(s, occ) for s, _w, occ in built if o.o_state_reached(occ, state)]
    if not kept:
        raise EmptyWindowData("state never occupied")
    fn: AnalysisSpec = p["fn"]
    fp = dict(fn.params)
    window = query.window
    if fn.kind == "windowed_statistic":
        pooled = []
        for s, occ in kept:
            for r in o.o_restricted_records(s, occ, state):
                if window.start_ms <= r.timestamp < window.end_ms:
                    v = r.payload.get(fp["key"])
                    if o.is_num(v):
                        pooled.append(float(v))
        return QueryResult.scalar(o.o_stat(pooled, fp["stat"], fp.get("p")))
    if fn.kind == "event_count":
        target = query.predicate(fp["predicate"])
        total = 0
        for s, occ in kept:
            total += sum(1 for r in o.o_restricted_records(s, occ, state)
                         if window.start_ms <= r.timestamp < window.end_ms
                         and o.pred_matches(target, r.payload))
        return QueryResult.scalar(total)
    assert fn.kind == "conditional_aggregate", fn.kind
    target = query.predicate(fp["predicate"])
    gated = []
    for s, occ in kept:
        for r in o.o_restricted_records(s, occ, state):
            if not window.start_ms <= r.timestamp < window.end_ms:
                continue
            if not o.pred_matches(target, r.payload):
                continue
            v = r.payload.get(fp["key"])
            if o.is_num(v):
                gated.append(float(v))
    return QueryResult.scalar(o.o_aggregate(gated, fp["op"]))
