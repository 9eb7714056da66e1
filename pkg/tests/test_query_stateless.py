import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsforge.core import GlobalWindow
from tsforge.errors import (EmptyGatedSet, EmptyWindowData, SpecError,
                            ZeroWidthWindow)
from tsforge.filters import Condition, EventPredicate
from tsforge.query.stateless import (aggregate_values, conditional_aggregate,
                                     event_count, event_rate, numeric_values,
                                     percentile, pooled_statistic,
                                     windowed_statistic)

import oracles as o
from factories import mk_series

W = GlobalWindow(0, 1000)
MATCH_X = EventPredicate((Condition("kind", "=", "x"),))


def series_of(values, key="m", start=0, step=10, extra=None):
    rows = []
    for i, v in enumerate(values):
        payload = {key: v}
        payload.update(extra or {})
        rows.append((start + i * step, payload))
    return mk_series("e-1", rows)


# ------------------------------------------------------------------- counts

def test_event_count_basic():
    s = mk_series("e-1", [(0, {"kind": "x"}), (10, {"kind": "y"}),
                          (20, {"kind": "x"}), (1000, {"kind": "x"})])
    assert event_count(s, MATCH_X, W) == 2


def test_event_count_window_is_half_open():
    s = mk_series("e-1", [(0, {"kind": "x"}), (999, {"kind": "x"}),
                          (1000, {"kind": "x"})])
    assert event_count(s, MATCH_X, W) == 2


def test_event_rate_pinned():
    s = mk_series("e-1", [(100, {"kind": "x"}), (700, {"kind": "x"})])
    assert event_rate(s, MATCH_X, W) == pytest.approx(0.002)


def test_event_rate_zero_width():
    s = mk_series("e-1", [(0, {"kind": "x"})])
    with pytest.raises(SpecError):
        GlobalWindow(5, 5)
    hollow = GlobalWindow.__new__(GlobalWindow)
    object.__setattr__(hollow, "start_ms", 5)
    object.__setattr__(hollow, "end_ms", 5)
    with pytest.raises(ZeroWidthWindow):
        event_rate(s, MATCH_X, hollow)


def test_predicate_none_and_type_mismatch_fail():
    s = mk_series("e-1", [(0, {"other": 1}), (10, {"kind": 3}),
                          (20, {"kind": "x"})])
    assert event_count(s, MATCH_X, W) == 1
    gt = EventPredicate((Condition("m", ">", 5),))
    s2 = mk_series("e-1", [(0, {"m": "high"}), (10, {"m": 6})])
    assert event_count(s2, gt, W) == 1


def test_event_type_checks_action_then_event():
    pred = EventPredicate(event_type="go")
    s = mk_series("e-1", [(0, {"action": "go"}), (10, {"event": "go"}),
                          (20, {"action": "stop", "event": "go"}),
                          (30, {"x": 1})])
    assert event_count(s, pred, W) == 2


# --------------------------------------------------------------- statistics

def test_mean_pinned():
    assert windowed_statistic(series_of([2.0, 4.0]), "m", W, "mean") == 3.0


def test_std_of_identical_values_is_zero():
    assert windowed_statistic(series_of([5.0, 5.0, 5.0]), "m", W, "std") == 0.0


def test_std_population_convention():
    got = windowed_statistic(series_of([1.0, 3.0]), "m", W, "std")
    assert got == pytest.approx(1.0)  # population std, divide by N


def test_percentile_pinned_interpolation():
    s = series_of([1.0, 2.0, 3.0, 4.0])
    assert windowed_statistic(s, "m", W, "percentile", p=50) == 2.5
    assert windowed_statistic(s, "m", W, "percentile", p=0) == 1.0
    assert windowed_statistic(s, "m", W, "percentile", p=100) == 4.0
    assert windowed_statistic(s, "m", W, "percentile", p=25) == 1.75


def test_percentile_bounds_checked():
    with pytest.raises(SpecError):
        percentile([1.0], 101)
    with pytest.raises(SpecError):
        percentile([1.0], -1)
    with pytest.raises(EmptyWindowData):
        percentile([], 50)


def test_statistic_empty_window_raises():
    with pytest.raises(EmptyWindowData):
        windowed_statistic(series_of([]), "m", W, "mean")
    with pytest.raises(SpecError):
        windowed_statistic(series_of([1.0]), "m", W, "median")


def test_numeric_values_skip_non_numeric_and_bool():
    s = mk_series("e-1", [(0, {"m": 1.5}), (10, {"m": "garbled"}),
                          (20, {"m": True}), (30, {"m": 2}), (40, {"z": 9})])
    assert numeric_values(s, "m", W) == [1.5, 2.0]


def test_pooled_statistic_pools_across_entities():
    a = series_of([1.0, 2.0])
    b = mk_series("e-2", [(0, {"m": 6.0})])
    assert pooled_statistic([a, b], "m", W, "mean") == 3.0


# --------------------------------------------------------------- aggregates

def test_aggregate_pinned_examples():
    assert aggregate_values([], "sum") == 0.0
    assert aggregate_values([1.0, 9.0, 4.0], "max") == 9.0
    assert aggregate_values([1.0, 9.0, 4.0], "min") == 1.0
    assert aggregate_values([1.0, 9.0, 4.0], "avg") == pytest.approx(14.0 / 3)
    for op in ("max", "min", "avg"):
        with pytest.raises(EmptyGatedSet):
            aggregate_values([], op)
    with pytest.raises(SpecError):
        aggregate_values([1.0], "median")


def test_conditional_aggregate_gates_by_predicate():
    s = mk_series("e-1", [(0, {"kind": "x", "m": 5.0}),
                          (10, {"kind": "y", "m": 100.0}),
                          (20, {"kind": "x", "m": 7.0}),
                          (30, {"kind": "x", "m": "bad"})])
    assert conditional_aggregate(s, "m", MATCH_X, W, "sum") == 12.0
    assert conditional_aggregate(s, "m", MATCH_X, W, "max") == 7.0
    never = EventPredicate((Condition("kind", "=", "zz"),))
    assert conditional_aggregate(s, "m", never, W, "sum") == 0.0
    with pytest.raises(EmptyGatedSet):
        conditional_aggregate(s, "m", never, W, "avg")


# ------------------------------------------------------------ vs the oracle

floats = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1,
                  max_size=40)


@given(floats, st.floats(0, 100))
@settings(max_examples=120, deadline=None)
def test_percentile_matches_oracle(values, p):
    assert percentile(values, p) == pytest.approx(o.o_percentile(values, p),
                                                  rel=1e-9, abs=1e-9)


@given(floats)
@settings(max_examples=100, deadline=None)
def test_mean_std_match_oracle(values):
    s = series_of(values)
    assert windowed_statistic(s, "m", W, "mean") == pytest.approx(
        o.o_mean(values), rel=1e-12, abs=1e-9)
    assert windowed_statistic(s, "m", W, "std") == pytest.approx(
        o.o_std(values), rel=1e-9, abs=1e-9)


@given(st.lists(st.sampled_from(["x", "y", "z"]), max_size=50))
@settings(max_examples=80, deadline=None)
def test_event_count_matches_oracle(kinds):
    s = mk_series("e-1", [(i * 7, {"kind": k}) for i, k in enumerate(kinds)])
    want = o.o_event_count(s, MATCH_X, W)
    assert event_count(s, MATCH_X, W) == want
    assert want == kinds[:math.ceil(1000 / 7)].count("x") if kinds else want == 0


@given(st.lists(st.sampled_from(["x", "y"]), min_size=0, max_size=30),
       st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_event_count_additive_over_disjoint_windows(kinds, splits):
    s = mk_series("e-1", [(i * 10, {"kind": k}) for i, k in enumerate(kinds)])
    whole = event_count(s, MATCH_X, GlobalWindow(0, 300))
    cut = 300 // (splits + 1)
    parts = []
    prev = 0
    for j in range(splits):
        parts.append(GlobalWindow(prev, prev + cut))
        prev += cut
    parts.append(GlobalWindow(prev, 300))
    assert whole == sum(event_count(s, MATCH_X, w) for w in parts)
