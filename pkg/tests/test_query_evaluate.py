import pytest

from tsforge.core import Dataset, GlobalWindow, PredicatedWindow
from tsforge.errors import (EmptyWindowData, NoPairs, SpecError)
from tsforge.filters import Condition, EntityFilter, EventPredicate
from tsforge.query.evaluate import evaluate
from tsforge.query.incident import (deviation_count, deviation_exists,
                                    deviation_sigmas, extreme_entity,
                                    is_deviant)
from tsforge.query.occupancy import StateDef
from tsforge.query.spec import AnalysisSpec, QuerySpec

import equivalence
from factories import mk_dataset, mk_series
from reference_engine import ref_evaluate

W = GlobalWindow(100, 200)
BASE = GlobalWindow(0, 100)

PREDS = {
    "px": EventPredicate((Condition("kind", "=", "x"),)),
    "py": EventPredicate((Condition("kind", "=", "y"),)),
    "any": EventPredicate(),
}


def q(kind, params, flt=None, window=None, group_by=None, preds=None):
    return QuerySpec(
        entity_filter=flt or EntityFilter(),
        event_predicates=preds or PREDS,
        analysis=AnalysisSpec(kind, params),
        window=window or W,
        group_by=group_by,
    )


def kinds_series(eid, kinds, start=100, step=10, attrs=None, etype="thing"):
    rows = [(start + i * step, {"kind": k}) for i, k in enumerate(kinds)]
    return mk_series(eid, rows, attrs=attrs, etype=etype)


# ------------------------------------------------------- deviation primitives

def dev_series(base_vals, win_vals, eid="d-1"):
    rows = [(i * 10, {"m": v}) for i, v in enumerate(base_vals)]
    rows += [(100 + i * 10, {"m": v}) for i, v in enumerate(win_vals)]
    return mk_series(eid, rows)


def test_deviation_sigmas_pinned():
    s = dev_series([1.0, 3.0], [5.0])
    # baseline mean 2, population std 1, window mean 5
    assert deviation_sigmas(s, "m", W, BASE) == pytest.approx(3.0)


def test_deviation_sigmas_zero_std():
    flat = dev_series([2.0, 2.0], [2.0])
    assert deviation_sigmas(flat, "m", W, BASE) == 0.0
    up = dev_series([2.0, 2.0], [2.5])
    assert deviation_sigmas(up, "m", W, BASE) == float("inf")
    down = dev_series([2.0, 2.0], [1.5])
    assert deviation_sigmas(down, "m", W, BASE) == float("-inf")


def test_deviation_sigmas_none_when_data_missing():
    assert deviation_sigmas(dev_series([], [5.0]), "m", W, BASE) is None
    assert deviation_sigmas(dev_series([1.0, 3.0], []), "m", W, BASE) is None


def test_is_deviant_threshold_inclusive():
    s = dev_series([1.0, 3.0], [5.0])  # exactly 3 sigmas
    assert is_deviant(s, "m", W, BASE, 3.0)
    assert not is_deviant(s, "m", W, BASE, 3.0001)
    dipped = dev_series([1.0, 3.0], [-1.0])  # -3 sigmas, absolute value
    assert is_deviant(dipped, "m", W, BASE, 3.0)


def test_deviation_exists_and_count():
    quiet = dev_series([1.0, 3.0], [2.0], eid="q-1")
    loud = dev_series([1.0, 3.0], [9.0], eid="l-1")
    assert deviation_exists([quiet, loud], "m", W, BASE, 3.0)
    assert not deviation_exists([quiet], "m", W, BASE, 3.0)
    assert deviation_count([quiet, loud], "m", W, BASE, 3.0) == 1


def test_extreme_entity_modes_and_ties():
    a = dev_series([], [5.0], eid="a-1")
    b = dev_series([], [5.0], eid="b-1")
    c = dev_series([], [1.0], eid="c-1")
    assert extreme_entity([b, a, c], "m", W) == "a-1"  # tie -> smaller id
    assert extreme_entity([b, a, c], "m", W, mode="min") == "c-1"
    with pytest.raises(EmptyWindowData):
        extreme_entity([mk_series("z-1", [(150, {"other": 1})])], "m", W)


# ------------------------------------------------------------ whole queries

def test_event_count_sums_over_entities():
    ds = mk_dataset([kinds_series("e-1", ["x", "y", "x"]),
                     kinds_series("e-2", ["x"])])
    got = evaluate(q("event_count", {"predicate": "px"}), ds)
    assert got.kind == "scalar" and got.value == 3


def test_filter_restricts_selection():
    ds = mk_dataset([kinds_series("e-1", ["x"], attrs={"grp": "g1"}),
                     kinds_series("e-2", ["x"], attrs={"grp": "g2"})])
    flt = EntityFilter((Condition("grp", "=", "g1"),))
    got = evaluate(q("event_count", {"predicate": "px"}, flt=flt), ds)
    assert got.value == 1


def test_result_invariant_under_entity_reordering():
    a = mk_series("e-1", [(110, {"kind": "x", "m": 2.0}),
                          (120, {"kind": "x", "m": 4.0})],
                  attrs={"grp": "g1"})
    b = mk_series("e-2", [(115, {"kind": "y", "m": 9.0})],
                  attrs={"grp": "g2"})
    fwd = mk_dataset([a, b])
    rev = mk_dataset([b, a])
    for kind, params in [
        ("event_count", {"predicate": "px"}),
        ("windowed_statistic", {"key": "m", "stat": "mean"}),
        ("extreme_entity", {"key": "m"}),
    ]:
        query = q(kind, params)
        assert evaluate(query, fwd) == evaluate(query, rev)


def test_event_rate_sums_per_scope_rates():
    ds = mk_dataset([kinds_series("e-1", ["x"]),
                     kinds_series("e-2", ["x", "x"])])
    got = evaluate(q("event_rate", {"predicate": "px"}), ds)
    assert got.value == pytest.approx(1 / 100 + 2 / 100)


def test_grouped_matches_ungrouped_for_constant_attribute():
    ds = mk_dataset([kinds_series("e-1", ["x"], attrs={"grp": "g1"}),
                     kinds_series("e-2", ["x", "x"], attrs={"grp": "g1"})])
    plain = evaluate(q("event_count", {"predicate": "px"}), ds)
    grouped = evaluate(q("event_count", {"predicate": "px"},
                         group_by=("grp",)), ds)
    assert grouped.kind == "grouped"
    assert grouped.value["values"] == {'["g1"]': plain.value}
    assert grouped.value["errors"] == {}


def test_grouped_partitions_and_sorts_keys():
    ds = mk_dataset([kinds_series("e-1", ["x"], attrs={"grp": "g2"}),
                     kinds_series("e-2", ["x", "x"], attrs={"grp": "g1"}),
                     kinds_series("e-3", ["y"], attrs={"grp": "g1"})])
    got = evaluate(q("event_count", {"predicate": "px"}, group_by=("grp",)),
                   ds)
    assert list(got.value["values"]) == ['["g1"]', '["g2"]']
    assert got.value["values"] == {'["g1"]': 2, '["g2"]': 1}


def test_grouped_entity_type_pseudo_attribute():
    ds = mk_dataset([kinds_series("e-1", ["x"], etype="alpha"),
                     kinds_series("e-2", ["x"], etype="beta")])
    got = evaluate(q("event_count", {"predicate": "px"},
                     group_by=("entity_type",)), ds)
    assert got.value["values"] == {'["alpha"]': 1, '["beta"]': 1}


def test_grouped_skips_entities_missing_the_attribute():
    ds = mk_dataset([kinds_series("e-1", ["x"], attrs={"grp": "g1"}),
                     kinds_series("e-2", ["x"])])
    got = evaluate(q("event_count", {"predicate": "px"}, group_by=("grp",)),
                   ds)
    assert got.value["values"] == {'["g1"]': 1}


def test_grouped_error_cells_do_not_abort():
    with_data = mk_series("e-1", [(150, {"m": 4.0})], attrs={"grp": "g1"})
    without = mk_series("e-2", [(150, {"kind": "x"})], attrs={"grp": "g2"})
    ds = mk_dataset([with_data, without])
    got = evaluate(q("windowed_statistic", {"key": "m", "stat": "mean"},
                     group_by=("grp",)), ds)
    assert got.value["values"] == {'["g1"]': 4.0}
    assert got.value["errors"] == {'["g2"]': "EmptyWindowData"}


def test_plain_query_error_propagates():
    ds = mk_dataset([kinds_series("e-1", ["x"])])
    with pytest.raises(NoPairs):
        evaluate(q("avg_time_between", {"first": "px", "second": "py"}), ds)


def test_predicated_window_one_scope_per_anchor():
    # two anchors -> two overlapping windows; the y at 115 is counted by both
    s = mk_series("e-1", [(100, {"kind": "x"}), (110, {"kind": "x"}),
                          (115, {"kind": "y"})])
    ds = mk_dataset([s])
    win = PredicatedWindow(PREDS["px"], 50)
    got = evaluate(q("event_count", {"predicate": "py"}, window=win), ds)
    assert got.value == 2


def test_predicated_window_rejected_for_global_only_kinds():
    ds = mk_dataset([kinds_series("e-1", ["x", "y"])])
    win = PredicatedWindow(PREDS["px"], 50)
    for kind, params in [
        ("conversion_rate", {"first": "px", "second": "py"}),
        ("extreme_entity", {"key": "m"}),
    ]:
        with pytest.raises(SpecError):
            evaluate(q(kind, params, window=win), ds)


def test_state_duration_is_mean_over_entities():
    defs = (StateDef("on", "px", "py"),)
    a = kinds_series("e-1", ["x", "y"])          # on for 10ms
    b = kinds_series("e-2", ["x", "y", "x", "y"])  # on for 10 + 10 = 20ms
    ds = mk_dataset([a, b])
    got = evaluate(q("state_duration", {"state": "on", "state_defs": defs}),
                   ds)
    assert got.value == pytest.approx(15.0)


def test_first_passage_default_t0_is_window_start():
    defs = (StateDef("on", "px", "py"),)
    s = kinds_series("e-1", ["z", "z", "x"])  # enters at 120
    ds = mk_dataset([s])
    got = evaluate(q("first_passage_time",
                     {"state": "on", "state_defs": defs}), ds)
    assert got.value == pytest.approx(20.0)


def test_kpi_in_state_pools_restricted_values():
    defs = (StateDef("on", "px", "py"),)
    rows_a = [(100, {"kind": "x"}), (110, {"m": 4.0}), (120, {"kind": "y"}),
              (130, {"m": 100.0})]
    rows_b = [(100, {"kind": "x"}), (150, {"m": 8.0})]
    ds = mk_dataset([mk_series("e-1", rows_a), mk_series("e-2", rows_b)])
    fn = AnalysisSpec("windowed_statistic", {"key": "m", "stat": "mean"})
    got = evaluate(q("kpi_in_state",
                     {"state": "on", "state_defs": defs, "fn": fn}), ds)
    assert got.value == pytest.approx(6.0)


def test_kpi_in_state_unreached_raises():
    defs = (StateDef("on", "px", "py"),)
    ds = mk_dataset([kinds_series("e-1", ["z"])])
    fn = AnalysisSpec("windowed_statistic", {"key": "m", "stat": "mean"})
    with pytest.raises(EmptyWindowData):
        evaluate(q("kpi_in_state",
                   {"state": "on", "state_defs": defs, "fn": fn}), ds)


def test_entities_reached_count_distinct_ids():
    defs = (StateDef("on", "px", "py"),)
    # predicated window gives several scopes for the same entity
    s = mk_series("e-1", [(100, {"kind": "x"}), (110, {"kind": "x"})])
    ds = mk_dataset([s])
    win = PredicatedWindow(PREDS["px"], 40)
    got = evaluate(q("entities_reached_count",
                     {"state": "on", "state_defs": defs}, window=win), ds)
    assert got.value == 1


# ------------------------------------------------------------------ chained

def chained_query(inner, guard_filter=None, threshold=3.0):
    return q("chained", {
        "guard_filter": guard_filter or EntityFilter(
            (Condition("role", "=", "guard"),)),
        "guard_key": "m",
        "guard_baseline": BASE,
        "guard_threshold_sigmas": threshold,
        "inner": inner,
    })


def chained_dataset(guard_shift):
    guard = dev_series([1.0, 3.0], [2.0 + guard_shift], eid="g-1")
    guard = mk_series("g-1", [(r.timestamp, r.payload) for r in guard.records],
                      attrs={"role": "guard"})
    worker = kinds_series("w-1", ["x", "x"], attrs={"role": "worker"})
    return mk_dataset([guard, worker])


def test_chained_guard_fails_natural_zero_scalar():
    ds = chained_dataset(guard_shift=0.0)
    inner = AnalysisSpec("event_count", {"predicate": "px"})
    got = evaluate(chained_query(inner), ds)
    assert got.kind == "scalar" and got.value == 0


def test_chained_guard_fails_natural_zero_boolean():
    ds = chained_dataset(guard_shift=0.0)
    inner = AnalysisSpec("deviation_exists",
                         {"key": "m", "baseline": BASE,
                          "threshold_sigmas": 1.0})
    got = evaluate(chained_query(inner), ds)
    assert got.kind == "boolean" and got.value is False


def test_chained_guard_holds_runs_inner():
    ds = chained_dataset(guard_shift=9.0)
    inner = AnalysisSpec("event_count", {"predicate": "px"})
    got = evaluate(chained_query(inner), ds)
    assert got.value == 2


def test_chained_guard_population_ignores_query_filter():
    # the query filter selects only workers; the guard still sees g-1
    ds = chained_dataset(guard_shift=9.0)
    inner = AnalysisSpec("event_count", {"predicate": "px"})
    query = QuerySpec(
        entity_filter=EntityFilter((Condition("role", "=", "worker"),)),
        event_predicates=PREDS,
        analysis=chained_query(inner).analysis,
        window=W,
    )
    got = evaluate(query, ds)
    assert got.value == 2


# --------------------------------------------------- engine vs reference run

def test_reference_engine_agrees_on_crafted_dataset():
    ds = mk_dataset([kinds_series("e-1", ["x", "y", "x"],
                                  attrs={"grp": "g1"}),
                     kinds_series("e-2", ["y", "y"], attrs={"grp": "g2"})])
    queries = [
        q("event_count", {"predicate": "px"}),
        q("event_count", {"predicate": "py"}, group_by=("grp",)),
        q("alternating_pattern_count", {"first": "px", "second": "py"}),
        q("extreme_entity", {"key": "m"}),
    ]
    for query in queries:
        try:
            mine = evaluate(query, ds)
        except Exception as exc:
            with pytest.raises(type(exc)):
                ref_evaluate(query, ds)
            continue
        assert ref_evaluate(query, ds) == mine


def test_randomized_equivalence_smoke():
    assert equivalence.run_equivalence(12, seed=4_114) == []
