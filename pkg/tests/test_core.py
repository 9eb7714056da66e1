import pytest

from tsforge.core import (Dataset, EntityRef, GlobalWindow,
                          MeasurementRecord, PredicatedWindow, StaticProfile,
                          TimeSeries, resolve_predicated_window, slice_series,
                          validate_dataset)
from tsforge.errors import SpecError
from tsforge.filters import Condition, EventPredicate

from factories import even_epochs, mk_dataset, mk_series


def test_global_window_rejects_empty_range():
    with pytest.raises(SpecError):
        GlobalWindow(10, 10)
    with pytest.raises(SpecError):
        GlobalWindow(10, 5)


def test_global_window_basics():
    w = GlobalWindow(100, 250)
    assert w.length_ms == 150
    assert w.contains(100)
    assert w.contains(249)
    assert not w.contains(250)
    assert not w.contains(99)


def test_predicated_window_needs_positive_lookahead():
    with pytest.raises(SpecError):
        PredicatedWindow(EventPredicate(), 0)


def test_record_payload_must_be_nonempty():
    with pytest.raises(SpecError):
        MeasurementRecord("e1", 0, {})


def test_series_rejects_decreasing_timestamps():
    ref = EntityRef("e1", "thing")
    records = (MeasurementRecord("e1", 5, {"x": 1}),
               MeasurementRecord("e1", 3, {"x": 1}))
    with pytest.raises(SpecError):
        TimeSeries(ref, StaticProfile({}), records)


def test_series_allows_equal_timestamps():
    series = mk_series("e1", [(5, {"x": 1}), (5, {"x": 2}), (7, {"x": 3})])
    assert len(series.records) == 3


def test_slice_series_half_open_bounds():
    series = mk_series("e1", [(t, {"x": t}) for t in (0, 10, 20, 30, 40)])
    sliced = slice_series(series, GlobalWindow(10, 30))
    assert [r.timestamp for r in sliced.records] == [10, 20]


def test_resolve_predicated_window_keeps_overlaps_separate():
    pred = EventPredicate((Condition("x", "=", 1),))
    series = mk_series("e1", [(0, {"x": 1}), (5, {"x": 1}), (9, {"x": 0})])
    wins = resolve_predicated_window(series, PredicatedWindow(pred, 100))
    assert [(w.start_ms, w.end_ms) for w in wins] == [(0, 100), (5, 105)]


def test_all_series_orders_tables_by_name():
    a = mk_series("a-1", [(0, {"x": 1})])
    b = mk_series("b-1", [(0, {"x": 1})])
    ds = Dataset("d", {"zeta": (a,), "alpha": (b,)})
    assert [t for t, _ in ds.all_series()] == ["alpha", "zeta"]


def test_horizon_prefers_epoch_index():
    series = mk_series("e1", [(500, {"x": 1})])
    ds = mk_dataset([series], epochs=even_epochs(2, 1000))
    horizon = ds.horizon()
    assert (horizon.start_ms, horizon.end_ms) == (0, 2000)


def test_horizon_falls_back_to_data_extent():
    series = mk_series("e1", [(5, {"x": 1}), (42, {"x": 2})])
    ds = mk_dataset([series])
    horizon = ds.horizon()
    assert horizon.start_ms == 5
    assert horizon.end_ms == 43


def test_validate_flags_duplicate_entity_ids_across_tables():
    one = mk_series("dup-1", [(0, {"x": 1})])
    two = mk_series("dup-1", [(0, {"x": 2})], etype="widget")
    ds = Dataset("d", {"t1": (one,), "t2": (two,)})
    kinds = [v.kind for v in validate_dataset(ds)]
    assert "duplicate_entity" in kinds


def test_series_rejects_record_id_mismatch():
    ref = EntityRef("e1", "thing")
    records = (MeasurementRecord("other", 0, {"x": 1}),)
    with pytest.raises(SpecError):
        TimeSeries(ref, StaticProfile({}), records)


def test_validate_accepts_clean_dataset():
    series = mk_series("e1", [(0, {"x": 1}), (10, {"x": 2})])
    assert validate_dataset(mk_dataset([series])) == []
