"""State occupancy reconstruction and analyses built on it.

Many questions are about inferred conditions (a session is "in
checkout", a device is "in critical") rather than raw events.  A
:class:`StateDef` names such a condition via entry and exit predicates
plus an optional timeout; :func:`reconstruct_occupancy` replays one
entity's in-window records against a list of defs and produces
non-overlapping intervals per state.

Replay rules, applied per record in timestamp order:

* an expired timeout closes the open interval at entry time + timeout;
* the open state's exit predicate closes it at the record timestamp;
* if nothing is open, the first def (declaration order) whose entry
  predicate matches opens an interval at the record timestamp;
* the window end closes whatever is still open (or the timeout expiry,
  whichever is earlier).

At most one state is open at a time, so intervals never overlap.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping

from ..core import GlobalWindow, TimeSeries, slice_series
from ..errors import EmptyWindowData, NeverReached, SpecError
from ..filters import EventPredicate


@dataclass(frozen=True)
class StateDef:
    """A named inferred condition.  ``entry`` and ``exit`` are names of
    predicates declared in the query's predicate set."""

    name: str
    entry: str
    exit: str
    timeout_ms: int | None = None

    def __post_init__(self) -> None:
        if self.timeout_ms is not None and self.timeout_ms <= 0:
            raise SpecError("state timeout must be positive when given")


@dataclass(frozen=True)
class StateOccupancy:
    """Per-state intervals for one entity, each a half-open (t_in, t_out)."""

    intervals: Mapping[str, tuple[tuple[float, float], ...]] = field(
        default_factory=dict)

    def ordered(self) -> list[tuple[str, float, float]]:
        flat = [(t_in, t_out, state)
                for state, spans in self.intervals.items()
                for t_in, t_out in spans]
        flat.sort()
        return [(state, t_in, t_out) for t_in, t_out, state in flat]

    def duration(self, state: str) -> float:
        return sum(t_out - t_in
                   for t_in, t_out in self.intervals.get(state, ()))

    def visit_count(self, state: str) -> int:
        return len(self.intervals.get(state, ()))


def _resolve(name: str,
             predicates: Mapping[str, EventPredicate]) -> EventPredicate:
    try:
        return predicates[name]
    except KeyError:
        raise SpecError(f"state def references unknown predicate {name!r}")


def reconstruct_occupancy(series: TimeSeries, state_defs: list[StateDef],
                          predicates: Mapping[str, EventPredicate],
                          window: GlobalWindow) -> StateOccupancy:
    names = [d.name for d in state_defs]
    if len(set(names)) != len(names):
        raise SpecError("state def names must be unique")
    out: dict[str, list[tuple[float, float]]] = {d.name: [] for d in state_defs}
    open_def: StateDef | None = None
    open_t: float = 0.0
    for rec in slice_series(series, window).records:
        t = rec.timestamp
        if open_def is not None and open_def.timeout_ms is not None \
                and t >= open_t + open_def.timeout_ms:
            out[open_def.name].append((open_t, open_t + open_def.timeout_ms))
            open_def = None
        if open_def is not None:
            if _resolve(open_def.exit, predicates).matches(rec.payload):
                out[open_def.name].append((open_t, float(t)))
                open_def = None
        if open_def is None:
            for d in state_defs:
                if _resolve(d.entry, predicates).matches(rec.payload):
                    open_def = d
                    open_t = float(t)
                    break
    if open_def is not None:
        t_out = float(window.end_ms)
        if open_def.timeout_ms is not None:
            t_out = min(t_out, open_t + open_def.timeout_ms)
        out[open_def.name].append((open_t, t_out))
    return StateOccupancy({name: tuple(spans) for name, spans in out.items()})


def state_reached(occ: StateOccupancy, state: str) -> bool:
    return occ.visit_count(state) > 0


def count_in_state(series: TimeSeries, occ: StateOccupancy, state: str,
                   predicate: EventPredicate, window: GlobalWindow) -> int:
    """Matching records whose timestamp falls inside a state interval."""
    spans = occ.intervals.get(state, ())
    count = 0
    for rec in slice_series(series, window).records:
        if not predicate.matches(rec.payload):
            continue
        if any(t_in <= rec.timestamp < t_out for t_in, t_out in spans):
            count += 1
    return count


def state_duration(occ: StateOccupancy, state: str) -> float:
    """Total sojourn milliseconds in the state."""
    return occ.duration(state)


def first_passage_time(occ: StateOccupancy, state: str, t0: float) -> float:
    """Milliseconds from t0 until the state is first entered at or
    after t0.  Raises NeverReached when it never is."""
    entries = [t_in for t_in, _ in occ.intervals.get(state, ())
               if t_in >= t0]
    if not entries:
        raise NeverReached(f"state {state!r} is not entered after t0={t0}")
    return min(entries) - t0


def transition_matrix(occupancies: list[StateOccupancy], states: list[str],
                      normalize: bool = True) -> list[list[float]]:
    """Counts of consecutive-interval transitions, summed over entities.

    Row i gives transitions out of states[i]; with ``normalize`` each
    nonzero row is scaled to sum to one.
    """
    index = {s: i for i, s in enumerate(states)}
    counts = [[0.0] * len(states) for _ in states]
    for occ in occupancies:
        seq = [state for state, _, _ in occ.ordered()]
        for a, b in zip(seq, seq[1:]):
            if a in index and b in index:
                counts[index[a]][index[b]] += 1.0
    if normalize:
        for row in counts:
            total = sum(row)
            if total > 0:
                for j in range(len(row)):
                    row[j] /= total
    return counts


def common_paths(occupancies: list[StateOccupancy], top_n: int,
                 max_len: int) -> list[tuple[tuple[str, ...], int]]:
    """Most frequent contiguous state sequences of length 2..max_len.

    Ranked by descending count, then lexicographically.  Asking for
    zero paths is allowed and yields an empty list.
    """
    if max_len < 2:
        raise SpecError("common_paths needs max_len >= 2")
    if top_n < 0:
        raise SpecError(f"common_paths got negative top_n {top_n}")
    counter: Counter[tuple[str, ...]] = Counter()
    for occ in occupancies:
        seq = [state for state, _, _ in occ.ordered()]
        for length in range(2, max_len + 1):
            for i in range(len(seq) - length + 1):
                counter[tuple(seq[i:i + length])] += 1
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_n]


def loop_count(occ: StateOccupancy, state: str) -> int:
    """Re-entries: visits beyond the first, zero if never visited."""
    visits = occ.visit_count(state)
    return visits - 1 if visits > 0 else 0


def occupancy_distribution(occ: StateOccupancy) -> dict[str, float]:
    """Fraction of occupied time per state; fractions sum to one."""
    durations = {state: occ.duration(state) for state in occ.intervals}
    total = sum(durations.values())
    if total <= 0:
        raise EmptyWindowData("entity occupies no state in the window")
    return {state: d / total for state, d in durations.items()}


def pooled_occupancy_distribution(
        occupancies: list[StateOccupancy]) -> dict[str, float]:
    """Distribution over total time pooled across entities."""
    durations: dict[str, float] = {}
    for occ in occupancies:
        for state in occ.intervals:
            durations[state] = durations.get(state, 0.0) + occ.duration(state)
    total = sum(durations.values())
    if total <= 0:
        raise EmptyWindowData("no entity occupies any state in the window")
    return {state: d / total for state, d in durations.items()}


def restrict_to_state(series: TimeSeries, occ: StateOccupancy,
                      state: str) -> TimeSeries:
    """A copy of the series keeping only records inside state intervals."""
    spans = occ.intervals.get(state, ())
    records = tuple(rec for rec in series.records
                    if any(t_in <= rec.timestamp < t_out
                           for t_in, t_out in spans))
    return TimeSeries(series.entity, series.profile, records)


def kpi_in_state(series: TimeSeries, occ: StateOccupancy, state: str,
                 fn: Callable[[TimeSeries], float]) -> float:
    """Apply a stateless analysis to the state-restricted series.

    An empty occupancy has no defined KPI and raises EmptyWindowData.
    """
    if not state_reached(occ, state):
        raise EmptyWindowData(f"state {state!r} is never occupied")
    return fn(restrict_to_state(series, occ, state))
