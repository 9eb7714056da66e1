"""Declarative project configuration.

One JSON document drives the whole pipeline: scenario (entity types,
exemplars, epochs, tables), an ordered pattern list, suite counts, and
an optional agent endpoint.  Every parse or validation failure raises
ConfigError carrying the dotted path of the offending field, e.g.
``scenario.exemplars[1].schedule.period_ms``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .core import GlobalWindow
from .datagen import (EntityTypeSpec, EpochSpec, ExemplarSpec,
                      ObservationSchedule, ScenarioSpec, Seasonality,
                      SignalShape, SignalSpec, StateMachineSpec, Transition)
from .distributions import Distribution, Domain
from .errors import ConfigError, SpecError
from .filters import Condition, EntityFilter
from .harness import AgentEndpoint
from .patterns import CascadeSpec, CascadeStage, Linkage, PatternSpec
from .qa.suite import SuiteConfig


@dataclass(frozen=True)
class ProjectConfig:
    scenario: ScenarioSpec
    patterns: tuple[object, ...]
    suite: SuiteConfig
    endpoint: AgentEndpoint | None
    output_dir: str
    trials: int = 3
    pass_k: int = 2


def _require(obj: Mapping, key: str, path: str) -> Any:
    if not isinstance(obj, Mapping):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return obj[key]


def _expect(value: Any, types, path: str, what: str) -> Any:
    if not isinstance(value, types) or isinstance(value, bool):
        raise ConfigError(path, f"expected {what}")
    return value


def _int(value: Any, path: str) -> int:
    return int(_expect(value, int, path, "an integer"))


def _num(value: Any, path: str) -> float:
    return float(_expect(value, (int, float), path, "a number"))


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, "expected a string")
    return value


def _wrap(path: str, builder, *args, **kwargs):
    """Turn a domain-level SpecError into a path-tagged ConfigError."""
    try:
        return builder(*args, **kwargs)
    except SpecError as exc:
        raise ConfigError(path, str(exc)) from exc


def _domain(obj: Mapping | None, path: str) -> Domain | None:
    if obj is None:
        return None
    allow = obj.get("allow")
    return Domain(low=obj.get("low"), high=obj.get("high"),
                  allow=tuple(allow) if allow is not None else None)


def _distribution(obj: Any, path: str) -> Distribution:
    family = _str(_require(obj, "family", path), f"{path}.family")
    params = obj.get("params", {})
    if not isinstance(params, Mapping):
        raise ConfigError(f"{path}.params", "expected an object")
    fixed = {k: tuple(v) if isinstance(v, list) else v
             for k, v in params.items()}
    return _wrap(path, Distribution, family, fixed,
                 _domain(obj.get("domain"), f"{path}.domain"))


def _condition(arr: Any, path: str) -> Condition:
    if not isinstance(arr, list) or len(arr) != 3:
        raise ConfigError(path, "expected a [key, op, value] triple")
    return _wrap(path, Condition, _str(arr[0], f"{path}[0]"),
                 _str(arr[1], f"{path}[1]"), arr[2])


def _conditions(arr: Any, path: str) -> tuple[Condition, ...]:
    if not isinstance(arr, list):
        raise ConfigError(path, "expected a list of conditions")
    return tuple(_condition(c, f"{path}[{i}]") for i, c in enumerate(arr))


def _entity_filter(arr: Any, path: str) -> EntityFilter:
    return _wrap(path, EntityFilter, _conditions(arr, path))


def _window(arr: Any, path: str) -> GlobalWindow:
    if not isinstance(arr, list) or len(arr) != 2:
        raise ConfigError(path, "expected [start_ms, end_ms]")
    return _wrap(path, GlobalWindow, _int(arr[0], f"{path}[0]"),
                 _int(arr[1], f"{path}[1]"))


def _state_machine(obj: Any, path: str) -> StateMachineSpec:
    states = tuple(_str(s, f"{path}.states[{i}]") for i, s in
                   enumerate(_require(obj, "states", path)))
    transitions = {}
    for state, arcs in _require(obj, "transitions", path).items():
        parsed = []
        for i, arc in enumerate(arcs):
            apath = f"{path}.transitions.{state}[{i}]"
            parsed.append(_wrap(
                apath, Transition,
                _str(_require(arc, "target", apath), f"{apath}.target"),
                _num(_require(arc, "weight", apath), f"{apath}.weight"),
                _conditions(arc.get("guard", []), f"{apath}.guard")))
        transitions[state] = tuple(parsed)
    dwell = {state: _distribution(d, f"{path}.dwell.{state}")
             for state, d in _require(obj, "dwell", path).items()}
    return _wrap(path, StateMachineSpec, states,
                 _str(_require(obj, "initial", path), f"{path}.initial"),
                 transitions, dwell)


def _seasonality(obj: Mapping | None, path: str) -> Seasonality | None:
    if obj is None:
        return None
    return _wrap(path, Seasonality,
                 _num(_require(obj, "amplitude", path), f"{path}.amplitude"),
                 _num(_require(obj, "period_ms", path), f"{path}.period_ms"),
                 _num(obj.get("phase_rad", 0.0), f"{path}.phase_rad"))


def _shape(obj: Any, path: str) -> SignalShape:
    if not isinstance(obj, Mapping):
        raise ConfigError(path, "expected an object")
    values = obj.get("values")
    weights = obj.get("value_weights")
    return _wrap(
        path, SignalShape,
        base_level=_num(obj.get("base_level", 0.0), f"{path}.base_level"),
        trend_slope=_num(obj.get("trend_slope", 0.0), f"{path}.trend_slope"),
        seasonality=_seasonality(obj.get("seasonality"),
                                 f"{path}.seasonality"),
        noise_sigma=_num(obj.get("noise_sigma", 0.0), f"{path}.noise_sigma"),
        emit_probability=_num(obj.get("emit_probability", 1.0),
                              f"{path}.emit_probability"),
        values=tuple(values) if values is not None else None,
        value_weights=tuple(weights) if weights is not None else None)


def _signals(obj: Any, path: str) -> SignalSpec:
    if not isinstance(obj, Mapping):
        raise ConfigError(path, "expected an object of key -> state -> shape")
    shapes = {}
    for key, per_state in obj.items():
        if not isinstance(per_state, Mapping):
            raise ConfigError(f"{path}.{key}", "expected state -> shape map")
        for state, shape in per_state.items():
            shapes[(key, state)] = _shape(shape, f"{path}.{key}.{state}")
    return _wrap(path, SignalSpec, shapes)


def _schedule(obj: Any, path: str) -> ObservationSchedule:
    kind = _str(_require(obj, "kind", path), f"{path}.kind")
    period = obj.get("period_ms")
    mean = obj.get("mean_interarrival_ms")
    return _wrap(path, ObservationSchedule, kind,
                 _num(period, f"{path}.period_ms") if period is not None
                 else None,
                 _num(mean, f"{path}.mean_interarrival_ms")
                 if mean is not None else None)


def _entity_types(obj: Any, path: str) -> dict[str, EntityTypeSpec]:
    if not isinstance(obj, Mapping):
        raise ConfigError(path, "expected an object")
    out = {}
    for name, spec in obj.items():
        tpath = f"{path}.{name}"
        attrs = {attr: _distribution(d, f"{tpath}.attributes.{attr}")
                 for attr, d in (spec.get("attributes", {}) or {}).items()}
        out[name] = _wrap(tpath, EntityTypeSpec, name, attrs)
    return out


def _exemplar(obj: Any, path: str,
              types: dict[str, EntityTypeSpec]) -> ExemplarSpec:
    tname = _str(_require(obj, "entity_type", path), f"{path}.entity_type")
    if tname not in types:
        raise ConfigError(f"{path}.entity_type",
                          f"unknown entity type {tname!r}")
    return _wrap(
        path, ExemplarSpec,
        _str(_require(obj, "behavior_name", path), f"{path}.behavior_name"),
        types[tname],
        _state_machine(_require(obj, "state_machine", path),
                       f"{path}.state_machine"),
        _signals(_require(obj, "signals", path), f"{path}.signals"),
        _schedule(_require(obj, "schedule", path), f"{path}.schedule"),
        _int(_require(obj, "n_entities", path), f"{path}.n_entities"),
        _int(_require(obj, "duration_ms", path), f"{path}.duration_ms"))


def _epoch(obj: Any, path: str) -> EpochSpec:
    blend_raw = _require(obj, "blend", path)
    if not isinstance(blend_raw, list):
        raise ConfigError(f"{path}.blend",
                          "expected an ordered list of [name, weight] pairs")
    blend = []
    for i, pair in enumerate(blend_raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{path}.blend[{i}]",
                              "expected a [name, weight] pair")
        blend.append((_str(pair[0], f"{path}.blend[{i}][0]"),
                      _num(pair[1], f"{path}.blend[{i}][1]")))
    return _wrap(
        path, EpochSpec,
        _str(_require(obj, "epoch_id", path), f"{path}.epoch_id"),
        _window(_require(obj, "window", path), f"{path}.window"),
        _int(_require(obj, "total_entities", path), f"{path}.total_entities"),
        tuple(blend))


def _scenario(obj: Any, path: str) -> ScenarioSpec:
    types = _entity_types(_require(obj, "entity_types", path),
                          f"{path}.entity_types")
    exemplars_raw = _require(obj, "exemplars", path)
    exemplars = tuple(_exemplar(e, f"{path}.exemplars[{i}]", types)
                      for i, e in enumerate(exemplars_raw))
    epochs = tuple(_epoch(e, f"{path}.epochs[{i}]")
                   for i, e in enumerate(_require(obj, "epochs", path)))
    mapping = _require(obj, "table_mapping", path)
    if not isinstance(mapping, Mapping):
        raise ConfigError(f"{path}.table_mapping", "expected an object")
    return _wrap(path, ScenarioSpec,
                 _str(_require(obj, "name", path), f"{path}.name"),
                 exemplars, epochs, dict(mapping),
                 _int(_require(obj, "seed", path), f"{path}.seed"))


def _pattern(obj: Any, path: str) -> PatternSpec:
    keys = obj.get("keys", [])
    return _wrap(
        path, PatternSpec,
        _str(_require(obj, "kind", path), f"{path}.kind"),
        _entity_filter(_require(obj, "target_filter", path),
                       f"{path}.target_filter"),
        tuple(_str(k, f"{path}.keys[{i}]") for i, k in enumerate(keys)),
        _window(_require(obj, "window", path), f"{path}.window"),
        _num(_require(obj, "magnitude", path), f"{path}.magnitude"))


def _linkage(obj: Mapping | None, path: str) -> Linkage | None:
    if obj is None:
        return None
    return Linkage(upstream_key=obj.get("upstream_key", "entity_id"),
                   downstream_key=obj.get("downstream_key", "entity_id"))


def _cascade(obj: Any, path: str) -> CascadeSpec:
    stages_raw = _require(obj, "stages", path)
    stages = []
    for i, st in enumerate(stages_raw):
        spath = f"{path}.stages[{i}]"
        stages.append(_wrap(
            spath, CascadeStage,
            _pattern(_require(st, "pattern", spath), f"{spath}.pattern"),
            _int(st.get("lag_ms", 0), f"{spath}.lag_ms"),
            _linkage(st.get("linkage"), f"{spath}.linkage")))
    return _wrap(path, CascadeSpec, tuple(stages))


def _patterns(arr: Any, path: str) -> tuple[object, ...]:
    if arr is None:
        return ()
    if not isinstance(arr, list):
        raise ConfigError(path, "expected a list")
    out: list[object] = []
    for i, obj in enumerate(arr):
        ipath = f"{path}[{i}]"
        if isinstance(obj, Mapping) and "stages" in obj:
            out.append(_cascade(obj, ipath))
        else:
            out.append(_pattern(obj, ipath))
    return tuple(out)


def _suite(obj: Any, path: str) -> SuiteConfig:
    if obj is None:
        return SuiteConfig(counts={})
    counts = _require(obj, "counts", path)
    if not isinstance(counts, Mapping):
        raise ConfigError(f"{path}.counts", "expected an object")
    return _wrap(path, SuiteConfig,
                 {k: _int(v, f"{path}.counts.{k}")
                  for k, v in counts.items()},
                 _int(obj.get("seed", 0), f"{path}.seed"),
                 _str(obj.get("persona", "default"), f"{path}.persona"))


def _endpoint(obj: Mapping | None, path: str) -> AgentEndpoint | None:
    if obj is None:
        return None
    return _wrap(
        path, AgentEndpoint,
        _str(_require(obj, "base_url", path), f"{path}.base_url"),
        _str(obj.get("path", "/ask"), f"{path}.path"),
        dict(obj.get("headers", {})),
        _str(obj.get("question_field", "question"),
             f"{path}.question_field"),
        _str(obj.get("answer_path", "answer"), f"{path}.answer_path"),
        _int(obj.get("timeout_ms", 30000), f"{path}.timeout_ms"),
        _int(obj.get("max_parallel", 4), f"{path}.max_parallel"))


def parse_config(obj: Any, root: str = "config") -> ProjectConfig:
    if not isinstance(obj, Mapping):
        raise ConfigError(root, "top level must be an object")
    scenario = _scenario(_require(obj, "scenario", root), f"{root}.scenario")
    return ProjectConfig(
        scenario=scenario,
        patterns=_patterns(obj.get("patterns"), f"{root}.patterns"),
        suite=_suite(obj.get("suite"), f"{root}.suite"),
        endpoint=_endpoint(obj.get("endpoint"), f"{root}.endpoint"),
        output_dir=_str(obj.get("output_dir", "out"), f"{root}.output_dir"),
        trials=_int(obj.get("trials", 3), f"{root}.trials"),
        pass_k=_int(obj.get("pass_k", 2), f"{root}.pass_k"))


def load_config(path) -> ProjectConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    try:
        obj = json.loads(text)
    except ValueError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return parse_config(obj, root=str(path))
