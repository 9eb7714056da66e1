"""Randomized dual-route checking: engine vs. brute-force reference.

``run_equivalence`` builds small random datasets (at most 50 entities
and 500 records each), throws one randomized query of every analysis
kind at each, and evaluates both routes.  Results must agree exactly
for integers, booleans, and strings, and within 1e-9 relative for
floats; when one route raises, the other must raise the same error
class.  Returns a list of human-readable mismatch descriptions.
"""

from __future__ import annotations

import numpy as np

from tsforge.core import (Dataset, EntityRef, GlobalWindow,
                          MeasurementRecord, PredicatedWindow, StaticProfile,
                          TimeSeries)
from tsforge.errors import QueryError
from tsforge.filters import Condition, EntityFilter, EventPredicate
from tsforge.query.evaluate import evaluate
from tsforge.query.occupancy import StateDef
from tsforge.query.spec import ANALYSIS_KINDS, AnalysisSpec, QuerySpec

from reference_engine import ref_evaluate

HORIZON = 10_000
KINDS = ("x", "y", "z")
ACTIONS = ("go", "stop", "ping")
GROUPS = ("g1", "g2", "g3")

# Kinds whose window must stay global, per the evaluation contract.
GLOBAL_ONLY = {"conversion_rate", "extreme_entity", "kpi_in_state", "chained"}


def random_dataset(rng: np.random.Generator) -> Dataset:
    n_entities = int(rng.integers(1, 51))
    budget = int(rng.integers(n_entities, 501))
    per_entity = np.bincount(rng.integers(0, n_entities, size=budget),
                             minlength=n_entities)
    tables: dict[str, list[TimeSeries]] = {"things": [], "widgets": []}
    for i in range(n_entities):
        etype = "thing" if rng.random() < 0.6 else "widget"
        profile = StaticProfile({
            "grp": str(rng.choice(GROUPS)),
            "size": int(rng.integers(1, 10)),
        })
        eid = f"{etype}-{i:03d}"
        stamps = np.sort(rng.integers(0, HORIZON, size=int(per_entity[i])))
        records = []
        for t in stamps:
            payload: dict = {"m1": float(np.round(rng.normal(50, 20), 3))}
            if rng.random() < 0.05:
                payload["m1"] = "garbled"
            if rng.random() < 0.7:
                payload["m2"] = float(np.round(rng.uniform(0, 10), 3))
            if rng.random() < 0.8:
                payload["kind"] = str(rng.choice(KINDS))
            if rng.random() < 0.4:
                payload["action"] = str(rng.choice(ACTIONS))
            records.append(MeasurementRecord(eid, int(t), payload))
        tables["things" if etype == "thing" else "widgets"].append(
            TimeSeries(EntityRef(eid, etype), profile, tuple(records)))
    return Dataset("rand", {name: tuple(rows)
                            for name, rows in tables.items() if rows})


def _predicates(rng: np.random.Generator) -> dict[str, EventPredicate]:
    cut_hi = float(np.round(rng.uniform(45, 70), 1))
    cut_lo = float(np.round(rng.uniform(30, 55), 1))
    return {
        "pa": EventPredicate((Condition("kind", "=", str(rng.choice(KINDS))),)),
        "pb": EventPredicate(event_type=str(rng.choice(ACTIONS))),
        "pc": EventPredicate((Condition("m1", ">", cut_hi),)),
        "pd": EventPredicate((Condition("m1", "<=", cut_lo),)),
        "pe": EventPredicate((Condition("kind", "!=", str(rng.choice(KINDS))),)),
        "pf": EventPredicate(),
    }


def _filter(rng: np.random.Generator) -> EntityFilter:
    roll = rng.random()
    if roll < 0.4:
        return EntityFilter()
    if roll < 0.6:
        return EntityFilter((Condition("grp", "=", str(rng.choice(GROUPS))),))
    if roll < 0.8:
        return EntityFilter((Condition("size", ">", int(rng.integers(1, 9))),))
    return EntityFilter((Condition("entity_type", "=", "thing"),))


def _global_window(rng: np.random.Generator) -> GlobalWindow:
    a = int(rng.integers(0, HORIZON - 10))
    b = int(rng.integers(a + 1, HORIZON + 500))
    return GlobalWindow(a, b)


def _window(rng: np.random.Generator, kind: str):
    if kind not in GLOBAL_ONLY and rng.random() < 0.25:
        anchor = "pb" if rng.random() < 0.5 else "pa"
        return PredicatedWindow(anchor=_predicates_cache[anchor],
                                lookahead_ms=int(rng.integers(50, 2000)))
    return _global_window(rng)


_predicates_cache: dict[str, EventPredicate] = {}


def _state_defs(rng: np.random.Generator) -> tuple[StateDef, ...]:
    names = ("hot", "cold", "odd")[:int(rng.integers(2, 4))]
    entries = ("pa", "pc", "pb")
    exits = ("pd", "pe", "pf")
    defs = []
    for i, name in enumerate(names):
        timeout = int(rng.integers(20, 800)) if rng.random() < 0.5 else None
        defs.append(StateDef(name, entries[i], exits[i], timeout))
    return tuple(defs)


def _params_for(kind: str, rng: np.random.Generator,
                window: GlobalWindow) -> dict:
    key = "m1" if rng.random() < 0.7 else "m2"
    base: dict = {}
    if kind in ("event_count", "event_rate"):
        base["predicate"] = str(rng.choice(("pa", "pb", "pc", "pf")))
    elif kind == "windowed_statistic":
        stat = str(rng.choice(("mean", "std", "percentile")))
        base.update(key=key, stat=stat)
        if stat == "percentile":
            base["p"] = float(rng.choice((0.0, 25.0, 50.0, 90.0, 100.0)))
    elif kind == "conditional_aggregate":
        base.update(key=key, predicate=str(rng.choice(("pa", "pc", "pe"))),
                    op=str(rng.choice(("sum", "max", "min", "avg"))))
    elif kind in ("avg_time_between", "conversion_rate",
                  "alternating_pattern_count"):
        base.update(first="pa", second=str(rng.choice(("pb", "pd"))))
    elif kind == "sequence_match":
        steps = ["pa", "pb", "pc"][:int(rng.integers(1, 4))]
        base["steps"] = tuple(steps)
        if len(steps) > 1 and rng.random() < 0.5:
            base["inter_step_max_ms"] = tuple(
                float(rng.integers(100, 3000)) if rng.random() < 0.7 else None
                for _ in range(len(steps) - 1))
    elif kind == "count_after_trigger":
        base.update(trigger="pb", target=str(rng.choice(("pa", "pc"))))
    elif kind == "cross_window_compare":
        w1 = _global_window(rng)
        w2 = _global_window(rng)
        base.update(key=key, window_before=w1, window_after=w2)
    elif kind in ("state_reached", "entities_reached_count", "state_duration",
                  "first_passage_time", "loop_count"):
        defs = _state_defs(rng)
        base.update(state=str(rng.choice([d.name for d in defs])),
                    state_defs=defs)
        if kind == "first_passage_time" and rng.random() < 0.5:
            base["t0_ms"] = int(rng.integers(0, HORIZON))
    elif kind == "count_in_state":
        defs = _state_defs(rng)
        base.update(state=str(rng.choice([d.name for d in defs])),
                    predicate="pe", state_defs=defs)
    elif kind == "transition_matrix":
        base["state_defs"] = _state_defs(rng)
        if rng.random() < 0.5:
            base["normalize"] = bool(rng.random() < 0.5)
    elif kind == "common_paths":
        base.update(state_defs=_state_defs(rng),
                    top_n=int(rng.integers(0, 6)),
                    max_len=int(rng.integers(2, 5)))
    elif kind == "occupancy_distribution":
        base["state_defs"] = _state_defs(rng)
    elif kind == "kpi_in_state":
        defs = _state_defs(rng)
        fn_kind = str(rng.choice(("windowed_statistic", "event_count",
                                  "conditional_aggregate")))
        if fn_kind == "windowed_statistic":
            fn = AnalysisSpec(fn_kind, {"key": key, "stat": "mean"})
        elif fn_kind == "event_count":
            fn = AnalysisSpec(fn_kind, {"predicate": "pe"})
        else:
            fn = AnalysisSpec(fn_kind,
                              {"key": key, "predicate": "pe", "op": "sum"})
        base.update(state=str(rng.choice([d.name for d in defs])),
                    state_defs=defs, fn=fn)
    elif kind in ("deviation_exists", "deviation_count"):
        base.update(key=key, baseline=_global_window(rng),
                    threshold_sigmas=float(np.round(rng.uniform(0.2, 3.0), 2)))
    elif kind == "extreme_entity":
        base["key"] = key
        if rng.random() < 0.5:
            base["mode"] = str(rng.choice(("max", "min")))
    elif kind == "chained":
        inner_kind = str(rng.choice(("event_count", "deviation_count",
                                     "sequence_match")))
        if inner_kind == "event_count":
            inner = AnalysisSpec(inner_kind, {"predicate": "pa"})
        elif inner_kind == "deviation_count":
            inner = AnalysisSpec(inner_kind, {
                "key": "m2", "baseline": _global_window(rng),
                "threshold_sigmas": 0.5})
        else:
            inner = AnalysisSpec(inner_kind, {"steps": ("pa", "pb")})
        base.update(
            guard_filter=_filter(rng), guard_key="m1",
            guard_baseline=_global_window(rng),
            guard_threshold_sigmas=float(np.round(rng.uniform(0.1, 1.5), 2)),
            inner=inner)
        if rng.random() < 0.5:
            base["guard_window"] = _global_window(rng)
    else:  # pragma: no cover - every kind above is handled
        raise AssertionError(kind)
    return base


def random_query(kind: str, rng: np.random.Generator) -> QuerySpec:
    preds = _predicates(rng)
    _predicates_cache.clear()
    _predicates_cache.update(preds)
    window = _window(rng, kind)
    group_by = None
    if rng.random() < 0.3:
        group_by = tuple(np.random.default_rng(int(rng.integers(1 << 30)))
                         .choice(["grp", "size", "entity_type"],
                                 size=int(rng.integers(1, 3)),
                                 replace=False).tolist())
    return QuerySpec(
        entity_filter=_filter(rng),
        event_predicates=preds,
        analysis=AnalysisSpec(kind, _params_for(kind, rng, window)),
        window=window,
        group_by=group_by)


def values_close(a, b, rel: float = 1e-9) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b or a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if isinstance(a, int) and isinstance(b, int):
            return a == b
        return abs(a - b) <= max(rel * max(abs(a), abs(b)), 1e-12)
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(
            values_close(a[k], b[k], rel) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(
            values_close(x, y, rel) for x, y in zip(a, b))
    return a == b


def _outcome(fn, query, dataset):
    try:
        return ("ok", fn(query, dataset))
    except QueryError as exc:
        return ("error", type(exc).__name__)


def check_query(query: QuerySpec, dataset: Dataset) -> str | None:
    got = _outcome(evaluate, query, dataset)
    want = _outcome(ref_evaluate, query, dataset)
    if got[0] != want[0]:
        return (f"{query.analysis.kind}: engine {got[0]} ({got[1]!r}) "
                f"vs reference {want[0]} ({want[1]!r})")
    if got[0] == "error":
        if got[1] != want[1]:
            return (f"{query.analysis.kind}: error class {got[1]} "
                    f"vs {want[1]}")
        return None
    eng, ref = got[1], want[1]
    if eng.kind != ref.kind or not values_close(eng.value, ref.value):
        return (f"{query.analysis.kind}: {eng.kind}={eng.value!r} "
                f"vs {ref.kind}={ref.value!r}")
    return None


def run_equivalence(n_datasets: int, seed: int = 20_240) -> list[str]:
    mismatches = []
    root = np.random.SeedSequence(seed)
    for child in root.spawn(n_datasets):
        rng = np.random.default_rng(child)
        dataset = random_dataset(rng)
        for kind in ANALYSIS_KINDS:
            query = random_query(kind, rng)
            problem = check_query(query, dataset)
            if problem:
                mismatches.append(problem)
    return mismatches
