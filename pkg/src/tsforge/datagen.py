"""Synthetic entity data generation.

The pipeline is declarative end to end.  An :class:`ExemplarSpec`
bundles an entity type, a semi-Markov state machine, per-(key, state)
signal shapes, and an observation schedule; realizing it yields an
:class:`Exemplar`, a pool of labeled trajectories.  A
:class:`ScenarioSpec` then blends exemplar draws across epochs into one
global :class:`~tsforge.core.Dataset`.

Everything is deterministic given the scenario seed.  Randomness flows
through :func:`tsforge.prng.substream`, keyed by exemplar name, entity
index, and purpose, so per-entity generation is order-independent.

Dwell times and signal parameters use milliseconds throughout.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import prng
from .core import (Dataset, EntityRef, GlobalWindow, MeasurementRecord,
                   StaticProfile, TimeSeries)
from .distributions import DWELL_FAMILIES, Distribution, sample
from .errors import DeadEnd, EmptyExemplar, SpecError
from .filters import Condition, conditions_hold

TWO_PI = 2.0 * math.pi

# Dwell draws are clamped away from zero so a degenerate distribution
# cannot stall the trajectory clock.
_MIN_DWELL_MS = 1e-6


@dataclass(frozen=True)
class EntityTypeSpec:
    """An entity type and the sampling spec for each static attribute."""

    type_name: str
    attributes: Mapping[str, Distribution] = field(default_factory=dict)


@dataclass(frozen=True)
class Transition:
    target: str
    weight: float
    guard: tuple[Condition, ...] = ()

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise SpecError(f"transition weight to {self.target!r} must be > 0")


@dataclass(frozen=True)
class StateMachineSpec:
    """Semi-Markov machine: weighted transitions plus per-state dwell.

    Transition guards are conjunctions over the entity's static profile;
    a transition whose guard fails is not admissible for that entity.
    Self-loops must be declared explicitly.
    """

    states: tuple[str, ...]
    initial: str
    transitions: Mapping[str, tuple[Transition, ...]]
    dwell: Mapping[str, Distribution]

    def __post_init__(self) -> None:
        if len(set(self.states)) != len(self.states):
            raise SpecError("state names must be unique")
        if self.initial not in self.states:
            raise SpecError(f"initial state {self.initial!r} is not declared")
        for state, outgoing in self.transitions.items():
            if state not in self.states:
                raise SpecError(f"transitions declared for unknown state {state!r}")
            for tr in outgoing:
                if tr.target not in self.states:
                    raise SpecError(
                        f"transition {state!r} -> {tr.target!r} targets an "
                        f"unknown state")
        for state in self.states:
            dw = self.dwell.get(state)
            if dw is None:
                raise SpecError(f"state {state!r} has no dwell distribution")
            if dw.family not in DWELL_FAMILIES:
                raise SpecError(
                    f"dwell for {state!r} must be one of {DWELL_FAMILIES}, "
                    f"got {dw.family!r}")


@dataclass(frozen=True)
class Seasonality:
    amplitude: float
    period_ms: float
    phase_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.period_ms <= 0:
            raise SpecError("seasonality period must be positive")


@dataclass(frozen=True)
class SignalShape:
    """How one dynamic key behaves while the entity sits in one state.

    Numeric form: base level, linear trend, optional sinusoidal
    seasonality, Gaussian noise.  Alternatively ``values``/``value_weights``
    declare a categorical emission (an event-type key such as ``action``),
    in which case the numeric fields are ignored.  Either way the key is
    observed with probability ``emit_probability`` per scheduled record.
    """

    base_level: float = 0.0
    trend_slope: float = 0.0
    seasonality: Seasonality | None = None
    noise_sigma: float = 0.0
    emit_probability: float = 1.0
    values: tuple[str, ...] | None = None
    value_weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.emit_probability <= 1.0:
            raise SpecError("emit_probability must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise SpecError("noise_sigma must be >= 0")
        if self.values is not None:
            if not self.values:
                raise SpecError("categorical emission needs at least one value")
            weights = self.value_weights
            if weights is None:
                weights = tuple(1.0 / len(self.values) for _ in self.values)
                object.__setattr__(self, "value_weights", weights)
            if len(weights) != len(self.values):
                raise SpecError("value_weights must match values")
            if abs(sum(weights) - 1.0) > 1e-9 or any(w < 0 for w in weights):
                raise SpecError("value_weights must be non-negative and sum to 1")


@dataclass(frozen=True)
class SignalSpec:
    """Signal shapes for every (dynamic key, state) pair."""

    shapes: Mapping[tuple[str, str], SignalShape]

    def keys(self) -> tuple[str, ...]:
        return tuple(sorted({key for key, _ in self.shapes}))

    def check_covers(self, states: tuple[str, ...]) -> None:
        for key in self.keys():
            for state in states:
                if (key, state) not in self.shapes:
                    raise SpecError(
                        f"signal for key {key!r} missing in state {state!r}")


@dataclass(frozen=True)
class ObservationSchedule:
    """When an entity is observed: fixed cadence or Poisson arrivals."""

    kind: str  # "fixed" | "poisson"
    period_ms: float | None = None
    mean_interarrival_ms: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "fixed":
            if self.period_ms is None or self.period_ms <= 0:
                raise SpecError("fixed schedule needs period_ms > 0")
        elif self.kind == "poisson":
            if self.mean_interarrival_ms is None or self.mean_interarrival_ms <= 0:
                raise SpecError("poisson schedule needs mean_interarrival_ms > 0")
        else:
            raise SpecError(f"unknown schedule kind {self.kind!r}")

    def expected_count(self, duration_ms: int) -> float:
        if self.kind == "fixed":
            return math.ceil(duration_ms / float(self.period_ms))
        return duration_ms / float(self.mean_interarrival_ms)


@dataclass(frozen=True)
class ExemplarSpec:
    """One behavior archetype: who, how it moves, what it emits, when."""

    behavior_name: str
    entity_type: EntityTypeSpec
    state_machine: StateMachineSpec
    signals: SignalSpec
    schedule: ObservationSchedule
    n_entities: int
    duration_ms: int

    def __post_init__(self) -> None:
        if self.n_entities <= 0:
            raise SpecError("exemplar needs n_entities > 0")
        if self.duration_ms <= 0:
            raise SpecError("exemplar needs duration_ms > 0")
        self.signals.check_covers(self.state_machine.states)


@dataclass(frozen=True)
class Exemplar:
    """Realized behavior pool.  Record timestamps are relative, from 0."""

    behavior_name: str
    entity_type_name: str
    duration_ms: int
    series: tuple[TimeSeries, ...]


@dataclass(frozen=True)
class EpochSpec:
    epoch_id: str
    window: GlobalWindow
    total_entities: int
    blend: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if self.total_entities < 0:
            raise SpecError("epoch total_entities must be >= 0")
        if not self.blend:
            raise SpecError("epoch blend must name at least one exemplar")
        total = sum(w for _, w in self.blend)
        if any(w < 0 for _, w in self.blend):
            raise SpecError("blend weights must be non-negative")
        if abs(total - 1.0) > 1e-9:
            raise SpecError(f"blend weights must sum to 1, got {total}")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    exemplars: tuple[ExemplarSpec, ...]
    epochs: tuple[EpochSpec, ...]
    table_mapping: Mapping[str, str]
    seed: int

    def __post_init__(self) -> None:
        names = [x.behavior_name for x in self.exemplars]
        if len(set(names)) != len(names):
            raise SpecError("exemplar behavior names must be unique")
        known = set(names)
        prev_end = None
        for ep in self.epochs:
            for name, _ in ep.blend:
                if name not in known:
                    raise SpecError(
                        f"epoch {ep.epoch_id!r} blends unknown exemplar {name!r}")
            if prev_end is not None and ep.window.start_ms < prev_end:
                raise SpecError("epoch windows must be ordered and disjoint")
            prev_end = ep.window.end_ms
        for x in self.exemplars:
            if x.entity_type.type_name not in self.table_mapping:
                raise SpecError(
                    f"entity type {x.entity_type.type_name!r} has no table mapping")


def sample_static_profile(spec: EntityTypeSpec,
                          rng: np.random.Generator) -> StaticProfile:
    """Draw one profile.  Attributes are sampled in sorted-key order so
    the draw sequence does not depend on declaration order."""
    values = {}
    for key in sorted(spec.attributes):
        values[key] = sample(spec.attributes[key], rng)
    return StaticProfile(values)


def simulate_state_trajectory(machine: StateMachineSpec, profile: StaticProfile,
                              duration_ms: int, rng: np.random.Generator
                              ) -> list[tuple[str, float, float]]:
    """Simulate (state, t_in, t_out) intervals exactly covering [0, duration).

    The final interval is truncated at the horizon.  Raises
    :class:`DeadEnd` when time remains but no transition is admissible
    for this profile.
    """
    intervals: list[tuple[str, float, float]] = []
    state = machine.initial
    t = 0.0
    while t < duration_ms:
        dwell = max(float(sample(machine.dwell[state], rng)), _MIN_DWELL_MS)
        t_out = min(t + dwell, float(duration_ms))
        intervals.append((state, t, t_out))
        t = t + dwell
        if t >= duration_ms:
            break
        admissible = [tr for tr in machine.transitions.get(state, ())
                      if conditions_hold(tr.guard, profile.values)]
        if not admissible:
            raise DeadEnd(
                f"state {state!r} has no admissible transition at t={t:.0f}ms")
        total = sum(tr.weight for tr in admissible)
        u = rng.random() * total
        acc = 0.0
        chosen = admissible[-1]
        for tr in admissible:
            acc += tr.weight
            if u < acc:
                chosen = tr
                break
        state = chosen.target
    return intervals


def state_at(intervals: list[tuple[str, float, float]], t_ms: float) -> str:
    """State active at time t.  Intervals must cover t."""
    starts = [iv[1] for iv in intervals]
    idx = bisect_right(starts, t_ms) - 1
    if idx < 0 or t_ms >= intervals[idx][2]:
        raise SpecError(f"time {t_ms} is not covered by the trajectory")
    return intervals[idx][0]


def schedule_times(schedule: ObservationSchedule, duration_ms: int,
                   rng: np.random.Generator) -> list[int]:
    """Integer observation times in [0, duration)."""
    times: list[int] = []
    if schedule.kind == "fixed":
        period = float(schedule.period_ms)
        t = 0.0
        while t < duration_ms:
            times.append(int(t))
            t += period
        return times
    mean = float(schedule.mean_interarrival_ms)
    t = rng.exponential(mean)
    while t < duration_ms:
        times.append(int(t))
        t += rng.exponential(mean)
    return times


def generate_measurement(signals: SignalSpec, key: str, state: str, t_ms: float,
                         rng: np.random.Generator) -> Any:
    """One observation of ``key`` at time t in ``state``, or None.

    None models the key being unobserved at this instant (the payload
    simply omits it).  Numeric form: base + trend*t + seasonal + noise.
    """
    shape = signals.shapes.get((key, state))
    if shape is None:
        raise SpecError(f"no signal declared for ({key!r}, {state!r})")
    if shape.emit_probability <= 0.0:
        return None
    if shape.emit_probability < 1.0 and rng.random() >= shape.emit_probability:
        return None
    if shape.values is not None:
        weights = shape.value_weights or ()
        u = rng.random()
        acc = 0.0
        for value, w in zip(shape.values, weights):
            acc += w
            if u < acc:
                return value
        return shape.values[-1]
    value = shape.base_level + shape.trend_slope * t_ms
    if shape.seasonality is not None:
        sea = shape.seasonality
        value += sea.amplitude * math.sin(TWO_PI * t_ms / sea.period_ms
                                          + sea.phase_rad)
    if shape.noise_sigma > 0:
        value += shape.noise_sigma * rng.standard_normal()
    return float(value)


def generate_exemplar(spec: ExemplarSpec, seed: int) -> Exemplar:
    """Realize every entity of an exemplar.

    Each entity's profile, trajectory, schedule, and per-key noise come
    from streams keyed by (seed, behavior, entity index, purpose), so
    the result is bit-stable however generation is parallelized or
    reordered.
    """
    keys = spec.signals.keys()
    series_out = []
    for i in range(spec.n_entities):
        name = spec.behavior_name
        profile = sample_static_profile(
            spec.entity_type, prng.substream(seed, name, i, "profile"))
        trajectory = simulate_state_trajectory(
            spec.state_machine, profile, spec.duration_ms,
            prng.substream(seed, name, i, "trajectory"))
        times = schedule_times(
            spec.schedule, spec.duration_ms,
            prng.substream(seed, name, i, "schedule"))
        key_rngs = {k: prng.substream(seed, name, i, "signal", k) for k in keys}
        entity_id = f"{name}-{i:04d}"
        records = []
        for t in times:
            state = state_at(trajectory, t)
            payload = {}
            for k in keys:
                value = generate_measurement(spec.signals, k, state, t, key_rngs[k])
                if value is not None:
                    payload[k] = value
            if not payload:
                continue  # nothing observed at this instant
            records.append(MeasurementRecord(entity_id, t, payload, state))
        series_out.append(TimeSeries(
            EntityRef(entity_id, spec.entity_type.type_name),
            profile, tuple(records)))
    return Exemplar(spec.behavior_name, spec.entity_type.type_name,
                    spec.duration_ms, tuple(series_out))


def _shift_series(series: TimeSeries, entity_id: str, offset_ms: int,
                  cutoff_ms: int) -> TimeSeries:
    records = []
    for rec in series.records:
        t = rec.timestamp + offset_ms
        if t >= cutoff_ms:
            break
        records.append(MeasurementRecord(entity_id, t, rec.payload,
                                         rec.state_label))
    return TimeSeries(EntityRef(entity_id, series.entity.entity_type),
                      series.profile, tuple(records))


def sample_from_exemplar(exemplar: Exemplar, n: int, interval: GlobalWindow,
                         rng: np.random.Generator) -> list[TimeSeries]:
    """Draw n trajectories from the pool and place them in the interval.

    Draws are without replacement while n <= pool size, then with
    replacement; repeats get fresh entity ids.  Each draw is shifted by
    a uniform offset so it starts inside the interval, and any records
    spilling past the interval end are truncated.
    """
    if n == 0:
        return []
    if not exemplar.series:
        raise EmptyExemplar(f"exemplar {exemplar.behavior_name!r} has no series")
    pool = len(exemplar.series)
    order = [int(j) for j in rng.permutation(pool)]
    picks: list[tuple[int, str]] = []
    for j in order[:min(n, pool)]:
        picks.append((j, exemplar.series[j].entity.entity_id))
    for r in range(max(0, n - pool)):
        j = int(rng.integers(0, pool))
        picks.append((j, f"{exemplar.series[j].entity.entity_id}-r{r + 1}"))

    span = min(exemplar.duration_ms, interval.length_ms)
    latest_start = interval.end_ms - span
    out = []
    for j, entity_id in picks:
        start = int(rng.integers(interval.start_ms, latest_start + 1))
        out.append(_shift_series(exemplar.series[j], entity_id, start,
                                 interval.end_ms))
    return out


def blend_counts(blend: tuple[tuple[str, float], ...],
                 total: int) -> list[tuple[str, int]]:
    """Per-exemplar draw counts: floor(weight * total), with the
    remainder going to the largest weight (declaration order breaks
    ties)."""
    counts = [(name, int(math.floor(w * total))) for name, w in blend]
    remainder = total - sum(c for _, c in counts)
    if remainder > 0:
        best = max(range(len(blend)), key=lambda i: (blend[i][1], -i))
        name, c = counts[best]
        counts[best] = (name, c + remainder)
    return counts


def assemble_global(scenario: ScenarioSpec) -> Dataset:
    """Blend exemplar draws across epochs into one sorted dataset.

    Entity identity persists across epochs: within each epoch the draws
    are numbered ``<type>-<counter>`` in (blend declaration, draw)
    order with the counter restarting per epoch, so slot i of a type
    names the same entity in every epoch while its behavior is re-drawn
    from that epoch's blend.  An entity's records are the concatenation
    of its per-epoch draws; its static profile is the one from its
    first appearance.  The final layout is sorted by (table, entity_id)
    with each series time-ordered.
    """
    exemplars = {spec.behavior_name: generate_exemplar(spec, scenario.seed)
                 for spec in scenario.exemplars}
    merged: dict[tuple[str, str], dict] = {}
    for epoch in scenario.epochs:
        counters: dict[str, int] = {}
        for name, count in blend_counts(epoch.blend, epoch.total_entities):
            if count == 0:
                continue
            rng = prng.substream(scenario.seed, "blend", epoch.epoch_id, name)
            drawn = sample_from_exemplar(exemplars[name], count,
                                         epoch.window, rng)
            for series in drawn:
                etype = series.entity.entity_type
                counters[etype] = counters.get(etype, 0) + 1
                eid = f"{etype}-{counters[etype]:04d}"
                slot = merged.setdefault(
                    (scenario.table_mapping[etype], eid),
                    {"etype": etype, "profile": series.profile,
                     "records": []})
                slot["records"].extend(
                    MeasurementRecord(eid, r.timestamp, r.payload,
                                      r.state_label)
                    for r in series.records)
    tables: dict[str, list[TimeSeries]] = {
        table: [] for table in sorted(set(scenario.table_mapping.values()))}
    for (table, eid), slot in sorted(merged.items()):
        tables[table].append(TimeSeries(EntityRef(eid, slot["etype"]),
                                        slot["profile"],
                                        tuple(slot["records"])))
    sorted_tables = {table: tuple(rows) for table, rows in tables.items()}
    epoch_index = tuple((ep.epoch_id, ep.window) for ep in scenario.epochs)
    return Dataset(scenario.name, sorted_tables, epoch_index, ())
