"""Inventory of realized values in a dataset.

Question templates fill their slots only from values that actually
occur in the generated tables, so every generated question is
answerable from the data.  This module does the single scan that
collects those values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..core import Dataset, GlobalWindow

MAX_DISTINCT = 12


def _is_number(v: object) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass(frozen=True)
class DatasetFacts:
    horizon: GlobalWindow
    epochs: tuple[tuple[str, GlobalWindow], ...]
    entity_types: tuple[str, ...]
    entity_ids: Mapping[str, tuple[str, ...]]
    numeric_keys: Mapping[str, tuple[str, ...]]
    categorical_keys: Mapping[str, Mapping[str, tuple[str, ...]]]
    categorical_attrs: Mapping[str, Mapping[str, tuple[str, ...]]]
    numeric_attrs: Mapping[str, tuple[str, ...]]

    def types_with(self, *, numeric: bool = False,
                   categorical: bool = False) -> tuple[str, ...]:
        out = []
        for t in self.entity_types:
            if numeric and not self.numeric_keys.get(t):
                continue
            if categorical and not self.categorical_keys.get(t):
                continue
            out.append(t)
        return tuple(out)


def collect_facts(dataset: Dataset) -> DatasetFacts:
    ids: dict[str, set[str]] = {}
    numeric: dict[str, set[str]] = {}
    categorical: dict[str, dict[str, set[str]]] = {}
    cat_attrs: dict[str, dict[str, set[str]]] = {}
    num_attrs: dict[str, set[str]] = {}
    for _table, series in dataset.all_series():
        etype = series.entity.entity_type
        ids.setdefault(etype, set()).add(series.entity.entity_id)
        for attr, value in series.profile.values.items():
            if _is_number(value):
                num_attrs.setdefault(etype, set()).add(attr)
            else:
                (cat_attrs.setdefault(etype, {})
                 .setdefault(attr, set()).add(str(value)))
        for rec in series.records:
            for key, value in rec.payload.items():
                if _is_number(value):
                    numeric.setdefault(etype, set()).add(key)
                else:
                    (categorical.setdefault(etype, {})
                     .setdefault(key, set()).add(str(value)))
    # A key that ever carries a string value is treated as categorical
    # only; mixed keys are dropped from the numeric side.
    for etype, keys in categorical.items():
        if etype in numeric:
            numeric[etype] -= set(keys)

    def trim(values: set[str]) -> tuple[str, ...]:
        return tuple(sorted(values)[:MAX_DISTINCT])

    entity_types = tuple(sorted(ids))
    return DatasetFacts(
        horizon=dataset.horizon(),
        epochs=tuple(dataset.epoch_index),
        entity_types=entity_types,
        entity_ids={t: tuple(sorted(v)) for t, v in ids.items()},
        numeric_keys={t: tuple(sorted(v)) for t, v in numeric.items()},
        categorical_keys={t: {k: trim(vals) for k, vals in sorted(m.items())}
                          for t, m in categorical.items()},
        categorical_attrs={t: {a: trim(vals) for a, vals in sorted(m.items())}
                           for t, m in cat_attrs.items()},
        numeric_attrs={t: tuple(sorted(v)) for t, v in num_attrs.items()},
    )
