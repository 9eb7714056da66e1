"""Query specifications, results, and their canonical JSON forms.

A query is the triple (entity filter, named event predicates, analysis)
plus a window and optional group-by attributes.  The JSON serialization
produced by :func:`canonical_json` is a stable external interface: keys
are sorted, separators are compact, and parsing it back yields an
equal :class:`QuerySpec`.

Analysis parameters are a flat mapping validated against the registry
in :data:`ANALYSIS_KINDS`.  Parameter values may include windows, state
definitions, entity filters, and one nested analysis (for state-scoped
KPIs and guarded queries); everything else is plain JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..core import GlobalWindow, PredicatedWindow, Window
from ..errors import SpecError
from ..filters import Condition, EntityFilter, EventPredicate
from .occupancy import StateDef

# kind -> (required params, optional params)
ANALYSIS_KINDS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "event_count": (("predicate",), ()),
    "event_rate": (("predicate",), ()),
    "windowed_statistic": (("key", "stat"), ("p",)),
    "conditional_aggregate": (("key", "predicate", "op"), ()),
    "avg_time_between": (("first", "second"), ()),
    "sequence_match": (("steps",), ("inter_step_max_ms",)),
    "count_after_trigger": (("trigger", "target"), ()),
    "conversion_rate": (("first", "second"), ()),
    "cross_window_compare": (("key", "window_before", "window_after"), ()),
    "alternating_pattern_count": (("first", "second"), ()),
    "state_reached": (("state", "state_defs"), ()),
    "entities_reached_count": (("state", "state_defs"), ()),
    "count_in_state": (("state", "predicate", "state_defs"), ()),
    "state_duration": (("state", "state_defs"), ()),
    "first_passage_time": (("state", "state_defs"), ("t0_ms",)),
    "transition_matrix": (("state_defs",), ("normalize",)),
    "common_paths": (("state_defs", "top_n", "max_len"), ()),
    "loop_count": (("state", "state_defs"), ()),
    "occupancy_distribution": (("state_defs",), ()),
    "kpi_in_state": (("state", "state_defs", "fn"), ()),
    "deviation_exists": (("key", "baseline", "threshold_sigmas"), ()),
    "deviation_count": (("key", "baseline", "threshold_sigmas"), ()),
    "extreme_entity": (("key",), ("mode",)),
    "chained": (("guard_filter", "guard_key", "guard_baseline",
                 "guard_threshold_sigmas", "inner"), ("guard_window",)),
}

# Analysis kinds a guarded query may nest: ones with a natural zero.
CHAINABLE_KINDS = ("event_count", "deviation_count", "deviation_exists",
                   "sequence_match", "entities_reached_count")

STATEFUL_KINDS = frozenset({
    "avg_time_between", "sequence_match", "count_after_trigger",
    "conversion_rate", "cross_window_compare", "alternating_pattern_count",
    "state_reached", "entities_reached_count", "count_in_state",
    "state_duration", "first_passage_time", "transition_matrix",
    "common_paths", "loop_count", "occupancy_distribution", "kpi_in_state",
})

_WINDOW_PARAMS = frozenset({"window_before", "window_after", "baseline",
                            "guard_baseline", "guard_window"})

RESULT_KINDS = ("scalar", "boolean", "text", "per_entity", "grouped",
                "matrix", "paths", "distribution")


@dataclass(frozen=True)
class AnalysisSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ANALYSIS_KINDS:
            raise SpecError(f"unknown analysis kind {self.kind!r}")
        required, optional = ANALYSIS_KINDS[self.kind]
        allowed = set(required) | set(optional)
        for name in required:
            if name not in self.params:
                raise SpecError(f"{self.kind} requires parameter {name!r}")
        for name in self.params:
            if name not in allowed:
                raise SpecError(f"{self.kind} got unknown parameter {name!r}")
        if self.kind == "chained":
            inner = self.params["inner"]
            if inner.kind not in CHAINABLE_KINDS:
                raise SpecError(
                    f"chained cannot nest analysis kind {inner.kind!r}")


@dataclass(frozen=True)
class QuerySpec:
    entity_filter: EntityFilter
    event_predicates: Mapping[str, EventPredicate]
    analysis: AnalysisSpec
    window: Window
    group_by: tuple[str, ...] | None = None

    def predicate(self, name: str) -> EventPredicate:
        try:
            return self.event_predicates[name]
        except KeyError:
            raise SpecError(f"analysis references unknown predicate {name!r}")


@dataclass(frozen=True)
class QueryResult:
    """Tagged result value.

    kind is one of: scalar, boolean, text, per_entity, grouped, matrix,
    paths, distribution.  ``value`` holds plain JSON-compatible data for
    that kind.
    """

    kind: str
    value: Any

    def __post_init__(self) -> None:
        if self.kind not in RESULT_KINDS:
            raise SpecError(f"unknown result kind {self.kind!r}")

    @staticmethod
    def scalar(v: float | int) -> "QueryResult":
        return QueryResult("scalar", v)

    @staticmethod
    def boolean(v: bool) -> "QueryResult":
        return QueryResult("boolean", bool(v))

    @staticmethod
    def text(v: str) -> "QueryResult":
        return QueryResult("text", v)


# ---------------------------------------------------------------------------
# JSON serialization


def condition_to_json(c: Condition) -> list:
    return [c.key, c.op, c.value]


def condition_from_json(data: Any) -> Condition:
    if not isinstance(data, list) or len(data) != 3:
        raise SpecError(f"condition must be [key, op, value], got {data!r}")
    return Condition(str(data[0]), str(data[1]), data[2])


def predicate_to_json(p: EventPredicate) -> dict:
    return {"conjuncts": [condition_to_json(c) for c in p.conjuncts],
            "event_type": p.event_type}


def predicate_from_json(data: Mapping[str, Any]) -> EventPredicate:
    return EventPredicate(
        conjuncts=tuple(condition_from_json(c)
                        for c in data.get("conjuncts", [])),
        event_type=data.get("event_type"))


def filter_to_json(f: EntityFilter) -> list:
    return [condition_to_json(c) for c in f.conjuncts]


def filter_from_json(data: Any) -> EntityFilter:
    return EntityFilter(tuple(condition_from_json(c) for c in data))


def window_to_json(w: Window) -> dict:
    if isinstance(w, GlobalWindow):
        return {"kind": "global", "start_ms": w.start_ms, "end_ms": w.end_ms}
    return {"kind": "predicated", "anchor": predicate_to_json(w.anchor),
            "lookahead_ms": w.lookahead_ms}


def window_from_json(data: Mapping[str, Any]) -> Window:
    kind = data.get("kind")
    if kind == "global":
        return GlobalWindow(int(data["start_ms"]), int(data["end_ms"]))
    if kind == "predicated":
        return PredicatedWindow(predicate_from_json(data["anchor"]),
                                int(data["lookahead_ms"]))
    raise SpecError(f"unknown window kind {kind!r}")


def state_def_to_json(d: StateDef) -> dict:
    return {"name": d.name, "entry": d.entry, "exit": d.exit,
            "timeout_ms": d.timeout_ms}


def state_def_from_json(data: Mapping[str, Any]) -> StateDef:
    timeout = data.get("timeout_ms")
    return StateDef(str(data["name"]), str(data["entry"]), str(data["exit"]),
                    None if timeout is None else int(timeout))


def analysis_to_json(a: AnalysisSpec) -> dict:
    params: dict[str, Any] = {}
    for name in sorted(a.params):
        value = a.params[name]
        if name in _WINDOW_PARAMS:
            params[name] = window_to_json(value)
        elif name == "state_defs":
            params[name] = [state_def_to_json(d) for d in value]
        elif name in ("fn", "inner"):
            params[name] = analysis_to_json(value)
        elif name == "guard_filter":
            params[name] = filter_to_json(value)
        else:
            params[name] = value
    return {"kind": a.kind, "params": params}


def analysis_from_json(data: Mapping[str, Any]) -> AnalysisSpec:
    raw = data.get("params", {})
    params: dict[str, Any] = {}
    for name, value in raw.items():
        if name in _WINDOW_PARAMS:
            params[name] = window_from_json(value)
        elif name == "state_defs":
            params[name] = tuple(state_def_from_json(d) for d in value)
        elif name in ("fn", "inner"):
            params[name] = analysis_from_json(value)
        elif name == "guard_filter":
            params[name] = filter_from_json(value)
        elif isinstance(value, list):
            params[name] = tuple(value)
        else:
            params[name] = value
    return AnalysisSpec(str(data["kind"]), params)


def query_to_json(q: QuerySpec) -> dict:
    return {
        "entity_filter": filter_to_json(q.entity_filter),
        "event_predicates": {name: predicate_to_json(p)
                             for name, p in sorted(q.event_predicates.items())},
        "analysis": analysis_to_json(q.analysis),
        "window": window_to_json(q.window),
        "group_by": list(q.group_by) if q.group_by else None,
    }


def query_from_json(data: Mapping[str, Any]) -> QuerySpec:
    group_by = data.get("group_by")
    return QuerySpec(
        entity_filter=filter_from_json(data.get("entity_filter", [])),
        event_predicates={str(k): predicate_from_json(v)
                          for k, v in data.get("event_predicates", {}).items()},
        analysis=analysis_from_json(data["analysis"]),
        window=window_from_json(data["window"]),
        group_by=tuple(group_by) if group_by else None,
    )


def canonical_json(q: QuerySpec) -> str:
    """Stable, compact, sorted-key JSON encoding of a query."""
    return json.dumps(query_to_json(q), sort_keys=True,
                      separators=(",", ":"))


def query_from_canonical(text: str) -> QuerySpec:
    return query_from_json(json.loads(text))


def result_to_json(r: QueryResult) -> dict:
    return {"kind": r.kind, "value": r.value}


def result_from_json(data: Mapping[str, Any]) -> QueryResult:
    return QueryResult(str(data["kind"]), data["value"])


def group_key_string(values: tuple[Any, ...]) -> str:
    """Canonical string form of a group-by value tuple (a JSON array)."""
    return json.dumps(list(values), sort_keys=True, separators=(",", ":"))
