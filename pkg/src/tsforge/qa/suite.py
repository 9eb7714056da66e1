"""Benchmark suite instantiation.

A suite is a fixed-size list of question/answer items per difficulty
tag.  Slots are filled by cycling deterministic template builders whose
parameters are drawn only from values realized in the dataset; a draw
that produces an unanswerable or duplicate query is discarded and the
slot is retried, up to a cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from ..core import Dataset, GlobalWindow, PredicatedWindow
from ..errors import ExhaustedRetries, QueryError, SpecError
from ..filters import Condition, EntityFilter, EventPredicate
from ..prng import substream
from ..query.evaluate import evaluate
from ..query.occupancy import StateDef
from ..query.spec import (AnalysisSpec, QueryResult, QuerySpec,
                          canonical_json, query_from_json, query_to_json,
                          result_from_json, result_to_json)
from .classify import TAGS
from .facts import DatasetFacts, collect_facts
from .incidents import incident_pool
from .render import render_question

MAX_ATTEMPTS = 50


@dataclass(frozen=True)
class QAItem:
    item_id: str
    question: str
    query: QuerySpec
    answer: QueryResult
    answer_type: str
    tolerance: float
    tags: tuple[str, ...]
    incident_id: str | None = None

    def primary_tag(self) -> str:
        return self.tags[0]


@dataclass(frozen=True)
class SuiteConfig:
    counts: Mapping[str, int]
    seed: int = 0
    persona: str = "default"
    max_attempts: int = MAX_ATTEMPTS

    def __post_init__(self) -> None:
        for tag, n in self.counts.items():
            if tag not in TAGS:
                raise SpecError(f"unknown suite tag {tag!r}")
            if n < 0:
                raise SpecError(f"negative count for tag {tag!r}")


def answer_type_of(result: QueryResult) -> str:
    if result.kind == "scalar":
        return "number"
    if result.kind == "boolean":
        return "boolean"
    if result.kind == "text":
        return "text"
    return "table"


def tolerance_of(result: QueryResult) -> float:
    if result.kind == "scalar" and not isinstance(result.value, int):
        return 1e-3
    return 0.0


def _presentable(result: QueryResult) -> bool:
    v = result.value
    if result.kind == "scalar":
        return isinstance(v, (int, float)) and math.isfinite(v)
    if result.kind == "boolean":
        return isinstance(v, bool)
    if result.kind == "text":
        return bool(v)
    if result.kind == "grouped":
        return bool(v.get("values"))
    if result.kind == "matrix":
        return bool(v.get("rows"))
    return bool(v)


# ---------------------------------------------------------------------------
# sampling helpers

def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(0, len(seq)))]


def _window(facts: DatasetFacts, rng: np.random.Generator) -> GlobalWindow:
    choices = [facts.horizon] + [w for _, w in facts.epochs]
    return _pick(rng, choices)


def _filter_for(facts: DatasetFacts, etype: str,
                rng: np.random.Generator) -> EntityFilter:
    conj = [Condition("entity_type", "=", etype)]
    attrs = facts.categorical_attrs.get(etype, {})
    if attrs and rng.random() < 0.4:
        attr = _pick(rng, sorted(attrs))
        conj.append(Condition(attr, "=", _pick(rng, attrs[attr])))
    return EntityFilter(tuple(conj))


def _cat_pick(facts: DatasetFacts, rng: np.random.Generator,
              n_values: int = 1):
    types = facts.types_with(categorical=True)
    if not types:
        return None
    etype = _pick(rng, types)
    keys = sorted(facts.categorical_keys[etype])
    key = _pick(rng, keys)
    values = facts.categorical_keys[etype][key]
    if len(values) < n_values:
        return None
    idx = rng.permutation(len(values))[:n_values]
    return etype, key, tuple(values[int(i)] for i in idx)


def _num_pick(facts: DatasetFacts, rng: np.random.Generator):
    types = facts.types_with(numeric=True)
    if not types:
        return None
    etype = _pick(rng, types)
    return etype, _pick(rng, facts.numeric_keys[etype])


def _eq_pred(key: str, value: str) -> EventPredicate:
    return EventPredicate((Condition(key, "=", value),))


def _state_setup(facts: DatasetFacts, rng: np.random.Generator,
                 n_states: int = 1):
    """Predicates and StateDefs for n distinct values of one categorical
    key, plus the carrying entity type."""
    picked = _cat_pick(facts, rng, n_values=n_states)
    if picked is None:
        return None
    etype, key, values = picked
    preds: dict[str, EventPredicate] = {}
    defs = []
    for v in values:
        preds[f"in_{v}"] = _eq_pred(key, v)
        preds[f"out_{v}"] = EventPredicate((Condition(key, "!=", v),))
        defs.append(StateDef(v, f"in_{v}", f"out_{v}"))
    return etype, key, values, preds, tuple(defs)


# ---------------------------------------------------------------------------
# template builders: (facts, rng) -> QuerySpec | None

def _b_count(facts, rng):
    picked = _cat_pick(facts, rng)
    if picked is None:
        return None
    etype, key, (value,) = picked
    return QuerySpec(_filter_for(facts, etype, rng),
                     {"p0": _eq_pred(key, value)},
                     AnalysisSpec("event_count", {"predicate": "p0"}),
                     _window(facts, rng))


def _b_stat(facts, rng):
    picked = _num_pick(facts, rng)
    if picked is None:
        return None
    etype, key = picked
    stat = _pick(rng, ["mean", "mean", "std", "percentile"])
    params = {"key": key, "stat": stat}
    if stat == "percentile":
        params["p"] = float(_pick(rng, [50, 90, 95, 99]))
    return QuerySpec(_filter_for(facts, etype, rng), {},
                     AnalysisSpec("windowed_statistic", params),
                     _window(facts, rng))


def _b_cond_agg(facts, rng):
    picked = _cat_pick(facts, rng)
    if picked is None:
        return None
    etype, ckey, (value,) = picked
    num_keys = facts.numeric_keys.get(etype)
    if not num_keys:
        return None
    nkey = _pick(rng, num_keys)
    op = _pick(rng, ["sum", "avg", "max", "min"])
    return QuerySpec(_filter_for(facts, etype, rng),
                     {"gate": _eq_pred(ckey, value)},
                     AnalysisSpec("conditional_aggregate",
                                  {"key": nkey, "predicate": "gate",
                                   "op": op}),
                     _window(facts, rng))


def _b_grouped_count(facts, rng):
    picked = _cat_pick(facts, rng)
    if picked is None:
        return None
    etype, key, (value,) = picked
    attrs = sorted(facts.categorical_attrs.get(etype, {}))
    if not attrs:
        return None
    return QuerySpec(EntityFilter((Condition("entity_type", "=", etype),)),
                     {"p0": _eq_pred(key, value)},
                     AnalysisSpec("event_count", {"predicate": "p0"}),
                     _window(facts, rng),
                     group_by=(_pick(rng, attrs),))


def _b_entity_stat(facts, rng):
    picked = _num_pick(facts, rng)
    if picked is None:
        return None
    etype, key = picked
    eid = _pick(rng, facts.entity_ids[etype])
    return QuerySpec(EntityFilter((Condition("entity_id", "=", eid),)), {},
                     AnalysisSpec("windowed_statistic",
                                  {"key": key, "stat": "mean"}),
                     _window(facts, rng))


def _b_lookahead_count(facts, rng):
    picked = _cat_pick(facts, rng, n_values=2)
    if picked is None:
        return None
    etype, key, (anchor, counted) = picked
    lookahead = int(_pick(rng, [300000, 600000, 1800000]))
    window = PredicatedWindow(_eq_pred(key, anchor), lookahead)
    return QuerySpec(_filter_for(facts, etype, rng),
                     {"p0": _eq_pred(key, counted)},
                     AnalysisSpec("event_count", {"predicate": "p0"}),
                     window)


STATELESS_TEMPLATES: tuple[tuple[str, Callable], ...] = (
    ("count", _b_count),
    ("stat", _b_stat),
    ("cond_agg", _b_cond_agg),
    ("grouped_count", _b_grouped_count),
    ("entity_stat", _b_entity_stat),
    ("lookahead_count", _b_lookahead_count),
)


def _b_time_between(facts, rng):
    picked = _cat_pick(facts, rng, n_values=2)
    if picked is None:
        return None
    etype, key, (v1, v2) = picked
    return QuerySpec(_filter_for(facts, etype, rng),
                     {"a": _eq_pred(key, v1), "b": _eq_pred(key, v2)},
                     AnalysisSpec("avg_time_between",
                                  {"first": "a", "second": "b"}),
                     _window(facts, rng))


def _b_sequence(facts, rng):
    picked = _cat_pick(facts, rng, n_values=3)
    if picked is None:
        picked = _cat_pick(facts, rng, n_values=2)
        if picked is None:
            return None
    etype, key, values = picked
    preds = {f"s{i}": _eq_pred(key, v) for i, v in enumerate(values)}
    params = {"steps": tuple(preds)}
    if rng.random() < 0.3:
        params["inter_step_max_ms"] = tuple(
            int(_pick(rng, [600000, 1800000, 3600000]))
            for _ in range(len(values) - 1))
    return QuerySpec(_filter_for(facts, etype, rng), preds,
                     AnalysisSpec("sequence_match", params),
                     _window(facts, rng))


def _b_after_trigger(facts, rng):
    picked = _cat_pick(facts, rng, n_values=2)
    if picked is None:
        return None
    etype, key, (v1, v2) = picked
    return QuerySpec(_filter_for(facts, etype, rng),
                     {"t": _eq_pred(key, v1), "x": _eq_pred(key, v2)},
                     AnalysisSpec("count_after_trigger",
                                  {"trigger": "t", "target": "x"}),
                     _window(facts, rng))


def _b_conversion(facts, rng):
    picked = _cat_pick(facts, rng, n_values=2)
    if picked is None:
        return None
    etype, key, (v1, v2) = picked
    return QuerySpec(EntityFilter((Condition("entity_type", "=", etype),)),
                     {"a": _eq_pred(key, v1), "b": _eq_pred(key, v2)},
                     AnalysisSpec("conversion_rate",
                                  {"first": "a", "second": "b"}),
                     _window(facts, rng))


def _b_epoch_compare(facts, rng):
    picked = _num_pick(facts, rng)
    if picked is None or len(facts.epochs) < 2:
        return None
    etype, key = picked
    idx = sorted(rng.permutation(len(facts.epochs))[:2].tolist())
    before = facts.epochs[int(idx[0])][1]
    after = facts.epochs[int(idx[1])][1]
    return QuerySpec(_filter_for(facts, etype, rng), {},
                     AnalysisSpec("cross_window_compare",
                                  {"key": key, "window_before": before,
                                   "window_after": after}),
                     facts.horizon)


def _b_alternation(facts, rng):
    picked = _cat_pick(facts, rng, n_values=2)
    if picked is None:
        return None
    etype, key, (v1, v2) = picked
    return QuerySpec(_filter_for(facts, etype, rng),
                     {"a": _eq_pred(key, v1), "b": _eq_pred(key, v2)},
                     AnalysisSpec("alternating_pattern_count",
                                  {"first": "a", "second": "b"}),
                     _window(facts, rng))


def _mk_state_builder(kind: str):
    def build(facts, rng):
        setup = _state_setup(facts, rng)
        if setup is None:
            return None
        etype, _key, (v,), preds, defs = setup
        return QuerySpec(_filter_for(facts, etype, rng), preds,
                         AnalysisSpec(kind, {"state": v, "state_defs": defs}),
                         _window(facts, rng))
    return build


def _b_occupancy_dist(facts, rng):
    setup = _state_setup(facts, rng, n_states=2)
    if setup is None:
        return None
    etype, _key, _values, preds, defs = setup
    return QuerySpec(_filter_for(facts, etype, rng), preds,
                     AnalysisSpec("occupancy_distribution",
                                  {"state_defs": defs}),
                     _window(facts, rng))


def _b_matrix(facts, rng):
    setup = _state_setup(facts, rng, n_states=3)
    if setup is None:
        setup = _state_setup(facts, rng, n_states=2)
        if setup is None:
            return None
    etype, _key, _values, preds, defs = setup
    return QuerySpec(EntityFilter((Condition("entity_type", "=", etype),)),
                     preds,
                     AnalysisSpec("transition_matrix", {"state_defs": defs}),
                     _window(facts, rng))


def _b_paths(facts, rng):
    setup = _state_setup(facts, rng, n_states=3)
    if setup is None:
        setup = _state_setup(facts, rng, n_states=2)
        if setup is None:
            return None
    etype, _key, _values, preds, defs = setup
    return QuerySpec(EntityFilter((Condition("entity_type", "=", etype),)),
                     preds,
                     AnalysisSpec("common_paths",
                                  {"state_defs": defs, "top_n": 3,
                                   "max_len": 3}),
                     _window(facts, rng))


def _b_kpi_in_state(facts, rng):
    setup = _state_setup(facts, rng)
    if setup is None:
        return None
    etype, _key, (v,), preds, defs = setup
    num_keys = facts.numeric_keys.get(etype)
    if not num_keys:
        return None
    fn = AnalysisSpec("windowed_statistic",
                      {"key": _pick(rng, num_keys), "stat": "mean"})
    return QuerySpec(_filter_for(facts, etype, rng), preds,
                     AnalysisSpec("kpi_in_state",
                                  {"state": v, "state_defs": defs, "fn": fn}),
                     _window(facts, rng))


def _b_count_in_state(facts, rng):
    setup = _state_setup(facts, rng, n_states=2)
    if setup is None:
        return None
    etype, key, (v1, v2), preds, defs = setup
    preds = dict(preds)
    preds["evt"] = _eq_pred(key, v2)
    return QuerySpec(_filter_for(facts, etype, rng), preds,
                     AnalysisSpec("count_in_state",
                                  {"state": v1, "predicate": "evt",
                                   "state_defs": (defs[0],)}),
                     _window(facts, rng))


STATEFUL_TEMPLATES: tuple[tuple[str, Callable], ...] = (
    ("time_between", _b_time_between),
    ("sequence", _b_sequence),
    ("reached_count", _mk_state_builder("entities_reached_count")),
    ("after_trigger", _b_after_trigger),
    ("dwell", _mk_state_builder("state_duration")),
    ("conversion", _b_conversion),
    ("epoch_compare", _b_epoch_compare),
    ("occupancy_dist", _b_occupancy_dist),
    ("alternation", _b_alternation),
    ("first_passage", _mk_state_builder("first_passage_time")),
    ("matrix", _b_matrix),
    ("kpi_in_state", _b_kpi_in_state),
    ("paths", _b_paths),
    ("reentries", _mk_state_builder("loop_count")),
    ("count_in_state", _b_count_in_state),
)

_TEMPLATE_SETS = {"stateless": STATELESS_TEMPLATES,
                  "stateful": STATEFUL_TEMPLATES}


# ---------------------------------------------------------------------------

def _make_item(dataset: Dataset, tag: str, index: int, query: QuerySpec,
               answer: QueryResult, persona: str,
               incident_id: str | None) -> QAItem:
    shell = QAItem(item_id=f"{dataset.name}-{tag}-{index:03d}",
                   question="", query=query, answer=answer,
                   answer_type=answer_type_of(answer),
                   tolerance=tolerance_of(answer),
                   tags=(tag,), incident_id=incident_id)
    question = render_question(shell, persona)
    return QAItem(shell.item_id, question, query, answer, shell.answer_type,
                  shell.tolerance, shell.tags, incident_id)


def _fill_generated(dataset: Dataset, facts: DatasetFacts, tag: str,
                    count: int, config: SuiteConfig,
                    seen: set[str]) -> list[QAItem]:
    templates = _TEMPLATE_SETS[tag]
    items: list[QAItem] = []
    for slot in range(count):
        placed = False
        for attempt in range(config.max_attempts):
            name, builder = templates[(slot + attempt) % len(templates)]
            rng = substream(config.seed, "qa", tag, slot, attempt)
            query = builder(facts, rng)
            if query is None:
                continue
            key = canonical_json(query)
            if key in seen:
                continue
            try:
                answer = evaluate(query, dataset)
            except QueryError:
                continue
            if not _presentable(answer):
                continue
            seen.add(key)
            items.append(_make_item(dataset, tag, slot, query, answer,
                                    config.persona, None))
            placed = True
            break
        if not placed:
            raise ExhaustedRetries(
                f"could not fill {tag} slot {slot} after "
                f"{config.max_attempts} attempts")
    return items


def _fill_incident(dataset: Dataset, facts: DatasetFacts, count: int,
                   config: SuiteConfig, seen: set[str]) -> list[QAItem]:
    pool = incident_pool(dataset, facts)
    items: list[QAItem] = []
    for derived in pool:
        if len(items) >= count:
            break
        key = canonical_json(derived.query)
        if key in seen:
            continue
        seen.add(key)
        items.append(_make_item(dataset, "incident", len(items),
                                derived.query, derived.answer, config.persona,
                                derived.incident_id))
    if len(items) < count:
        raise ExhaustedRetries(
            f"only {len(items)} distinct incident questions derivable, "
            f"{count} requested")
    return items


def instantiate_suite(dataset: Dataset,
                      config: SuiteConfig) -> tuple[QAItem, ...]:
    """Build the full suite for a dataset.  Deterministic in
    (dataset, config)."""
    facts = collect_facts(dataset)
    seen: set[str] = set()
    items: list[QAItem] = []
    for tag in ("stateless", "stateful", "incident"):
        count = int(config.counts.get(tag, 0))
        if count == 0:
            continue
        if tag == "incident":
            items.extend(_fill_incident(dataset, facts, count, config, seen))
        else:
            items.extend(_fill_generated(dataset, facts, tag, count,
                                         config, seen))
    return tuple(items)


def suite_counts(items) -> dict[str, int]:
    out: dict[str, int] = {}
    for item in items:
        out[item.primary_tag()] = out.get(item.primary_tag(), 0) + 1
    return out


# ---------------------------------------------------------------------------
# line-delimited JSON export

def item_to_json(item: QAItem) -> dict:
    return {
        "item_id": item.item_id,
        "question": item.question,
        "query": query_to_json(item.query),
        "answer": result_to_json(item.answer),
        "answer_type": item.answer_type,
        "tolerance": item.tolerance,
        "tags": list(item.tags),
        "incident_id": item.incident_id,
    }


def item_from_json(obj: dict) -> QAItem:
    return QAItem(
        item_id=obj["item_id"],
        question=obj["question"],
        query=query_from_json(obj["query"]),
        answer=result_from_json(obj["answer"]),
        answer_type=obj["answer_type"],
        tolerance=float(obj["tolerance"]),
        tags=tuple(obj["tags"]),
        incident_id=obj.get("incident_id"),
    )


def export_suite(items, path) -> None:
    lines = [json.dumps(item_to_json(item), sort_keys=True,
                        separators=(",", ":"))
             for item in items]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_suite(path) -> tuple[QAItem, ...]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(item_from_json(json.loads(line)))
    return tuple(out)
