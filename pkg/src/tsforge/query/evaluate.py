"""Query evaluation over a dataset.

``evaluate`` selects entities with the query's filter, resolves the
window per entity, dispatches the analysis, and aggregates across
entities.  With a group-by, selected entities are partitioned on their
attribute-value tuples and each group is evaluated independently; a
group whose analysis raises a :class:`~tsforge.errors.QueryError` gets
an error-valued cell instead of aborting the run.

Window handling is uniform: a global window contributes one (series,
window) scope per selected entity, while a predicated window
contributes one scope per anchor record.  Aggregation across scopes is
kind-appropriate: counts add, existence checks OR, statistics pool
their values, and per-entity summaries average.
"""

from __future__ import annotations

from typing import Any, Callable

from ..core import (Dataset, GlobalWindow, PredicatedWindow, TimeSeries,
                    resolve_predicated_window)
from ..errors import (EmptyWindowData, NeverReached, NoPairs, QueryError,
                      SpecError)
from . import incident, occupancy, stateful, stateless
from .spec import AnalysisSpec, QueryResult, QuerySpec, group_key_string

Scope = tuple[TimeSeries, GlobalWindow]


def select_series(dataset: Dataset, query: QuerySpec) -> list[TimeSeries]:
    selected = []
    for _, series in dataset.all_series():
        if query.entity_filter.matches(series.entity.entity_id,
                                       series.entity.entity_type,
                                       series.profile.values):
            selected.append(series)
    return selected


def resolve_scopes(series_list: list[TimeSeries],
                   window: GlobalWindow | PredicatedWindow) -> list[Scope]:
    scopes: list[Scope] = []
    for series in series_list:
        if isinstance(window, GlobalWindow):
            scopes.append((series, window))
        else:
            for win in resolve_predicated_window(series, window):
                scopes.append((series, win))
    return scopes


def evaluate(query: QuerySpec, dataset: Dataset) -> QueryResult:
    """Evaluate one query against one dataset."""
    selected = select_series(dataset, query)
    if query.group_by:
        return _evaluate_grouped(query, selected, dataset)
    return _evaluate_plain(query, selected, dataset)


def _evaluate_grouped(query: QuerySpec, selected: list[TimeSeries],
                      dataset: Dataset) -> QueryResult:
    groups: dict[str, list[TimeSeries]] = {}
    assert query.group_by is not None
    for series in selected:
        values = []
        missing = False
        for attr in query.group_by:
            if attr == "entity_type":
                values.append(series.entity.entity_type)
                continue
            v = series.profile.get(attr)
            if v is None:
                missing = True
                break
            values.append(v)
        if missing:
            continue
        groups.setdefault(group_key_string(tuple(values)), []).append(series)
    cells: dict[str, Any] = {}
    errors: dict[str, str] = {}
    for key in sorted(groups):
        try:
            result = _evaluate_plain(query, groups[key], dataset)
            cells[key] = result.value
        except QueryError as exc:
            errors[key] = type(exc).__name__
    return QueryResult("grouped", {"values": cells, "errors": errors})


def _evaluate_plain(query: QuerySpec, selected: list[TimeSeries],
                    dataset: Dataset) -> QueryResult:
    scopes = resolve_scopes(selected, query.window)
    return dispatch(query.analysis, query, scopes, selected, dataset)


def _require_global(query: QuerySpec) -> GlobalWindow:
    if not isinstance(query.window, GlobalWindow):
        raise SpecError(
            f"analysis {query.analysis.kind!r} needs a global window")
    return query.window


def _pooled_values(scopes: list[Scope], key: str) -> list[float]:
    values: list[float] = []
    for series, window in scopes:
        values.extend(stateless.numeric_values(series, key, window))
    return values


def _occupancies(scopes: list[Scope], params: dict, query: QuerySpec
                 ) -> list[tuple[Scope, occupancy.StateOccupancy]]:
    defs = list(params["state_defs"])
    preds = dict(query.event_predicates)
    return [(scope, occupancy.reconstruct_occupancy(scope[0], defs, preds,
                                                    scope[1]))
            for scope in scopes]


def _stateless_fn(fn_spec: AnalysisSpec, query: QuerySpec,
                  window: GlobalWindow) -> Callable[[list[TimeSeries]], float]:
    """Pooled stateless analysis over restricted series, for kpi_in_state."""
    params = dict(fn_spec.params)
    if fn_spec.kind == "windowed_statistic":
        return lambda many: stateless.pooled_statistic(
            many, params["key"], window, params["stat"], params.get("p"))
    if fn_spec.kind == "event_count":
        pred = query.predicate(params["predicate"])
        return lambda many: float(sum(
            stateless.event_count(s, pred, window) for s in many))
    if fn_spec.kind == "conditional_aggregate":
        pred = query.predicate(params["predicate"])

        def agg(many: list[TimeSeries]) -> float:
            values: list[float] = []
            for s in many:
                values.extend(stateless.gated_values(s, params["key"], pred,
                                                     window))
            return stateless.aggregate_values(values, params["op"])
        return agg
    raise SpecError(f"kpi_in_state cannot nest analysis kind {fn_spec.kind!r}")


def dispatch(analysis: AnalysisSpec, query: QuerySpec, scopes: list[Scope],
             selected: list[TimeSeries], dataset: Dataset) -> QueryResult:
    kind = analysis.kind
    params = dict(analysis.params)

    if kind == "event_count":
        pred = query.predicate(params["predicate"])
        return QueryResult.scalar(sum(
            stateless.event_count(s, pred, w) for s, w in scopes))

    if kind == "event_rate":
        pred = query.predicate(params["predicate"])
        return QueryResult.scalar(sum(
            stateless.event_rate(s, pred, w) for s, w in scopes))

    if kind == "windowed_statistic":
        values = _pooled_values(scopes, params["key"])
        return QueryResult.scalar(
            stateless._stat(values, params["stat"], params.get("p")))

    if kind == "conditional_aggregate":
        pred = query.predicate(params["predicate"])
        values: list[float] = []
        for s, w in scopes:
            values.extend(stateless.gated_values(s, params["key"], pred, w))
        return QueryResult.scalar(
            stateless.aggregate_values(values, params["op"]))

    if kind == "avg_time_between":
        first = query.predicate(params["first"])
        second = query.predicate(params["second"])
        pairs: list[tuple[int, int]] = []
        for s, w in scopes:
            pairs.extend(stateful.matched_pairs(s, first, second, w))
        if not pairs:
            raise NoPairs("no matched event pairs in any scope")
        return QueryResult.scalar(sum(b - a for a, b in pairs) / len(pairs))

    if kind == "sequence_match":
        steps = [query.predicate(name) for name in params["steps"]]
        gaps = params.get("inter_step_max_ms")
        gaps_list = list(gaps) if gaps is not None else None
        return QueryResult.boolean(any(
            stateful.sequence_match(s, steps, w, gaps_list)
            for s, w in scopes))

    if kind == "count_after_trigger":
        trigger = query.predicate(params["trigger"])
        target = query.predicate(params["target"])
        return QueryResult.scalar(sum(
            stateful.count_after_trigger(s, trigger, target, w)
            for s, w in scopes))

    if kind == "conversion_rate":
        first = query.predicate(params["first"])
        second = query.predicate(params["second"])
        window = _require_global(query)
        return QueryResult.scalar(
            stateful.conversion_rate(selected, first, second, window))

    if kind == "cross_window_compare":
        return QueryResult.scalar(stateful.cross_window_compare(
            selected, params["key"], params["window_before"],
            params["window_after"]))

    if kind == "alternating_pattern_count":
        first = query.predicate(params["first"])
        second = query.predicate(params["second"])
        return QueryResult.scalar(sum(
            stateful.alternating_pattern_count(s, first, second, w)
            for s, w in scopes))

    if kind in ("state_reached", "entities_reached_count", "count_in_state",
                "state_duration", "first_passage_time", "transition_matrix",
                "common_paths", "loop_count", "occupancy_distribution",
                "kpi_in_state"):
        return _dispatch_occupancy(kind, params, query, scopes)

    if kind == "deviation_exists":
        return QueryResult.boolean(any(
            incident.is_deviant(s, params["key"], w, params["baseline"],
                                params["threshold_sigmas"])
            for s, w in scopes))

    if kind == "deviation_count":
        deviant_ids = {s.entity.entity_id for s, w in scopes
                       if incident.is_deviant(s, params["key"], w,
                                              params["baseline"],
                                              params["threshold_sigmas"])}
        return QueryResult.scalar(len(deviant_ids))

    if kind == "extreme_entity":
        window = _require_global(query)
        return QueryResult.text(incident.extreme_entity(
            selected, params["key"], window, params.get("mode", "max")))

    if kind == "chained":
        return _dispatch_chained(params, query, scopes, selected, dataset)

    raise SpecError(f"unknown analysis kind {kind!r}")


def _dispatch_occupancy(kind: str, params: dict, query: QuerySpec,
                        scopes: list[Scope]) -> QueryResult:
    occ_pairs = _occupancies(scopes, params, query)
    occs = [occ for _, occ in occ_pairs]
    state = params.get("state")

    if kind == "state_reached":
        return QueryResult.boolean(any(
            occupancy.state_reached(occ, state) for occ in occs))

    if kind == "entities_reached_count":
        reached = {scope[0].entity.entity_id
                   for scope, occ in occ_pairs
                   if occupancy.state_reached(occ, state)}
        return QueryResult.scalar(len(reached))

    if kind == "count_in_state":
        pred = query.predicate(params["predicate"])
        return QueryResult.scalar(sum(
            occupancy.count_in_state(scope[0], occ, state, pred, scope[1])
            for scope, occ in occ_pairs))

    if kind == "state_duration":
        if not occs:
            raise EmptyWindowData("no entities selected")
        totals = [occupancy.state_duration(occ, state) for occ in occs]
        return QueryResult.scalar(sum(totals) / len(totals))

    if kind == "first_passage_time":
        times = []
        for scope, occ in occ_pairs:
            t0 = params.get("t0_ms")
            if t0 is None:
                t0 = scope[1].start_ms
            try:
                times.append(occupancy.first_passage_time(occ, state, t0))
            except NeverReached:
                continue
        if not times:
            raise NeverReached(f"no entity ever reaches state {state!r}")
        return QueryResult.scalar(sum(times) / len(times))

    if kind == "transition_matrix":
        states = [d.name for d in params["state_defs"]]
        rows = occupancy.transition_matrix(occs, states,
                                           params.get("normalize", True))
        return QueryResult("matrix", {"states": states, "rows": rows})

    if kind == "common_paths":
        ranked = occupancy.common_paths(occs, int(params["top_n"]),
                                        int(params["max_len"]))
        return QueryResult("paths", [[list(path), count]
                                     for path, count in ranked])

    if kind == "loop_count":
        return QueryResult.scalar(sum(
            occupancy.loop_count(occ, state) for occ in occs))

    if kind == "occupancy_distribution":
        return QueryResult("distribution",
                           occupancy.pooled_occupancy_distribution(occs))

    if kind == "kpi_in_state":
        restricted = [occupancy.restrict_to_state(scope[0], occ, state)
                      for scope, occ in occ_pairs
                      if occupancy.state_reached(occ, state)]
        if not restricted:
            raise EmptyWindowData(f"state {state!r} is never occupied")
        window = _require_global(query)
        fn = _stateless_fn(params["fn"], query, window)
        return QueryResult.scalar(fn(restricted))

    raise SpecError(f"unknown occupancy analysis {kind!r}")  # pragma: no cover


def _dispatch_chained(params: dict, query: QuerySpec, scopes: list[Scope],
                      selected: list[TimeSeries],
                      dataset: Dataset) -> QueryResult:
    """Evaluate the inner analysis only if the guard population shows a
    baseline-relative deviation; otherwise the result is the inner
    kind's natural zero."""
    guard_window = params.get("guard_window")
    if guard_window is None:
        guard_window = _require_global(query)
    guard_filter = params["guard_filter"]
    inner: AnalysisSpec = params["inner"]
    guard_population = [
        series for _, series in dataset.all_series()
        if guard_filter.matches(series.entity.entity_id,
                                series.entity.entity_type,
                                series.profile.values)]
    guard_holds = incident.deviation_exists(
        guard_population, params["guard_key"], guard_window,
        params["guard_baseline"], params["guard_threshold_sigmas"])
    if not guard_holds:
        if inner.kind in ("deviation_exists", "sequence_match",
                          "state_reached"):
            return QueryResult.boolean(False)
        return QueryResult.scalar(0)
    return dispatch(inner, query, scopes, selected, dataset)
