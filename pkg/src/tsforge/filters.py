"""Conjunctive predicates over attribute maps and record payloads.

Two predicate types share the same comparison language, a conjunction
of ``key op constant`` terms with ops ``= != < <= > >=``:

* :class:`EntityFilter` selects entities by static profile.  The pseudo
  keys ``entity_id`` and ``entity_type`` are always available.  An empty
  conjunction matches every entity.
* :class:`EventPredicate` selects measurement records by payload.  A key
  that is absent from the payload fails every comparison, including
  ``!=``.  The optional ``event_type`` field is shorthand for equality
  on the designated event payload key (``action``, or ``event`` when no
  ``action`` key is present).

State machine transition guards reuse the bare :class:`Condition` form
against static profiles.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import SpecError

OPS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

ORDER_OPS = ("<", "<=", ">", ">=")

EVENT_TYPE_KEYS = ("action", "event")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class Condition:
    """One ``key op constant`` comparison term."""

    key: str
    op: str
    value: Any

    def __post_init__(self) -> None:
        if self.op not in OPS:
            raise SpecError(f"unknown comparison op {self.op!r}")
        if self.op in ORDER_OPS and not _is_number(self.value):
            raise SpecError(
                f"op {self.op!r} needs a numeric constant, got {self.value!r}")

    def holds(self, found: Any) -> bool:
        """Evaluate against a looked-up value.  ``None`` (absent) fails."""
        if found is None:
            return False
        if self.op in ORDER_OPS:
            if not _is_number(found):
                return False
            return OPS[self.op](float(found), float(self.value))
        if _is_number(found) != _is_number(self.value):
            return False
        return OPS[self.op](found, self.value)


def conditions_hold(conds: tuple[Condition, ...], values: Mapping[str, Any]) -> bool:
    return all(c.holds(values.get(c.key)) for c in conds)


@dataclass(frozen=True)
class EventPredicate:
    """Conjunctive predicate over one record's payload."""

    conjuncts: tuple[Condition, ...] = ()
    event_type: str | None = None

    def matches(self, payload: Mapping[str, Any]) -> bool:
        if self.event_type is not None:
            observed = None
            for key in EVENT_TYPE_KEYS:
                if key in payload:
                    observed = payload[key]
                    break
            if observed != self.event_type:
                return False
        return conditions_hold(self.conjuncts, payload)

    def is_trivial(self) -> bool:
        return not self.conjuncts and self.event_type is None


MATCH_ALL = EventPredicate()


@dataclass(frozen=True)
class EntityFilter:
    """Conjunctive predicate over a static profile; empty matches all."""

    conjuncts: tuple[Condition, ...] = ()

    def matches(self, entity_id: str, entity_type: str,
                profile: Mapping[str, Any]) -> bool:
        for cond in self.conjuncts:
            if cond.key == "entity_id":
                found: Any = entity_id
            elif cond.key == "entity_type":
                found = entity_type
            else:
                found = profile.get(cond.key)
            if not cond.holds(found):
                return False
        return True
