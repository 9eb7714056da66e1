"""Deterministic natural-language rendering of queries.

Each analysis kind has one template per persona; slots are filled from
the query itself, so the same query always renders to the same string.
Personas trade verbosity: "default" asks a plain question, "terse"
gives a compact instruction, and "verbose" spells out the setup.
"""

from __future__ import annotations

from datetime import datetime, timezone

from ..core import GlobalWindow, PredicatedWindow
from ..errors import NoTemplate
from ..filters import Condition, EntityFilter, EventPredicate
from ..query.spec import AnalysisSpec, QuerySpec

PERSONAS = ("default", "terse", "verbose")

_OP_WORDS = {"=": "is", "!=": "is not", "<": "is below", "<=": "is at most",
             ">": "is above", ">=": "is at least"}

_AGG_WORDS = {"sum": "total", "max": "maximum", "min": "minimum",
              "avg": "average"}


def iso(t_ms: int) -> str:
    dt = datetime.fromtimestamp(t_ms // 1000, tz=timezone.utc)
    base = dt.strftime("%Y-%m-%dT%H:%M:%S")
    millis = t_ms % 1000
    return f"{base}.{millis:03d}Z" if millis else f"{base}Z"


def humanize_ms(ms: float) -> str:
    ms = float(ms)
    for unit, width in (("hour", 3600000.0), ("minute", 60000.0),
                        ("second", 1000.0)):
        if ms >= width and ms % width == 0:
            n = int(ms // width)
            return f"{n} {unit}" + ("s" if n != 1 else "")
    if ms >= 3600000.0:
        return f"{ms / 3600000.0:g} hours"
    if ms >= 60000.0:
        return f"{ms / 60000.0:g} minutes"
    if ms >= 1000.0:
        return f"{ms / 1000.0:g} seconds"
    return f"{ms:g} ms"


def describe_condition(c: Condition) -> str:
    return f"{c.key} {_OP_WORDS[c.op]} {c.value}"


def describe_predicate(p: EventPredicate) -> str:
    parts = []
    if p.event_type is not None:
        parts.append(f"{p.event_type} events")
    if p.conjuncts:
        clause = " and ".join(describe_condition(c) for c in p.conjuncts)
        if parts:
            parts.append(f"where {clause}")
        else:
            parts.append(f"records where {clause}")
    if not parts:
        return "records of any kind"
    return " ".join(parts)


def describe_filter(f: EntityFilter) -> str:
    etype = None
    eid = None
    rest = []
    for c in f.conjuncts:
        if c.key == "entity_type" and c.op == "=":
            etype = str(c.value)
        elif c.key == "entity_id" and c.op == "=":
            eid = str(c.value)
        else:
            rest.append(describe_condition(c))
    if eid is not None:
        noun = f"entity {eid}"
    elif etype is not None:
        noun = f"{etype} entities"
    else:
        noun = "all entities"
    if rest:
        noun += " whose " + " and ".join(rest)
    return noun


def describe_window(w: GlobalWindow | PredicatedWindow) -> str:
    if isinstance(w, GlobalWindow):
        return f"from {iso(w.start_ms)} to {iso(w.end_ms)}"
    anchor = describe_predicate(w.anchor)
    return (f"in the {humanize_ms(w.lookahead_ms)} following each "
            f"occurrence of {anchor}")


def _describe_state(query: QuerySpec, params: dict, name: str) -> str:
    for d in params.get("state_defs", ()):
        if d.name == name:
            entry = describe_predicate(query.predicate(d.entry))
            exit_ = describe_predicate(query.predicate(d.exit))
            timeout = ""
            if d.timeout_ms is not None:
                timeout = f", timing out after {humanize_ms(d.timeout_ms)}"
            return (f"the {name} state (entered on {entry} and left on "
                    f"{exit_}{timeout})")
    return f"the {name} state"


def _describe_state_defs(query: QuerySpec, params: dict) -> str:
    parts = []
    for d in params.get("state_defs", ()):
        entry = describe_predicate(query.predicate(d.entry))
        exit_ = describe_predicate(query.predicate(d.exit))
        timeout = ""
        if d.timeout_ms is not None:
            timeout = f"; timeout {humanize_ms(d.timeout_ms)}"
        parts.append(f"{d.name} (enter on {entry}; leave on {exit_}{timeout})")
    return "; ".join(parts)


def _stat_phrase(params: dict) -> str:
    stat = params["stat"]
    if stat == "mean":
        return "mean"
    if stat == "std":
        return "population standard deviation"
    p = params.get("p")
    return f"{p:g}th percentile"


def _fn_phrase(query: QuerySpec, fn: AnalysisSpec) -> str:
    params = dict(fn.params)
    if fn.kind == "windowed_statistic":
        return f"the {_stat_phrase(params)} of {params['key']}"
    if fn.kind == "event_count":
        return f"the count of {describe_predicate(query.predicate(params['predicate']))}"
    return (f"the {_AGG_WORDS[params['op']]} of {params['key']} over "
            f"{describe_predicate(query.predicate(params['predicate']))}")


# One template per (persona, kind).  Slot names are filled from the
# context dict built in render_question.
TEMPLATES: dict[str, dict[str, str]] = {
    "default": {
        "event_count": "How many {predicate} did {filter} record {window}{group}?",
        "event_rate": "At what rate per millisecond did {filter} record {predicate} {window}{group}?",
        "windowed_statistic": "What was the {stat} of {key} for {filter} {window}{group}?",
        "conditional_aggregate": "What was the {agg} of {key} over {predicate} for {filter} {window}{group}?",
        "avg_time_between": "What was the average time between {first} and the next matching {second}, in milliseconds, for {filter} {window}?",
        "sequence_match": "Did any of {filter} record {steps} in that order {window}{gaps}?",
        "count_after_trigger": "After the first occurrence of {trigger}, how many {target} did {filter} record {window}?",
        "conversion_rate": "What fraction of {filter} that recorded {first} went on to record {second} {window}?",
        "cross_window_compare": "By how much did the mean {key} of {filter} {after} change compared with {before}?",
        "alternating_pattern_count": "How many times did {filter} alternate from {first} to {second} and back {window}?",
        "state_reached": "Did any of {filter} ever enter {state} {window}?",
        "entities_reached_count": "How many of {filter} entered {state} {window}?",
        "count_in_state": "While inside {state}, how many {predicate} did {filter} record {window}?",
        "state_duration": "On average, how many milliseconds did {filter} spend inside {state} {window}?",
        "first_passage_time": "How many milliseconds passed before {filter} first entered {state} {window}?",
        "transition_matrix": "What are the transition probabilities between the conditions {state_defs} for {filter} {window}?",
        "common_paths": "What are the {top_n} most common paths of length up to {max_len} through the conditions {state_defs} for {filter} {window}?",
        "loop_count": "How many times did {filter} re-enter {state} {window}?",
        "occupancy_distribution": "What fraction of occupied time did {filter} spend in each of the conditions {state_defs} {window}?",
        "kpi_in_state": "While inside {state}, what was {fn} for {filter} {window}?",
        "deviation_exists": "Was there an anomalous shift in {key} for {filter} {window}, judged against the baseline {baseline} (at least {threshold:g} baseline standard deviations)?",
        "deviation_count": "How many of {filter} showed an anomalous shift in {key} {window}, judged against the baseline {baseline} (at least {threshold:g} baseline standard deviations)?",
        "extreme_entity": "Which of {filter} recorded the {direction} mean {key} during the anomaly window {window}?",
        "chained": "Given that {guard_filter} showed an anomalous shift in {guard_key} {guard_window} relative to the baseline {guard_baseline}, {inner_question}",
    },
    "terse": {
        "event_count": "Count {predicate} for {filter} {window}{group}.",
        "event_rate": "Rate per ms of {predicate} for {filter} {window}{group}.",
        "windowed_statistic": "{stat} of {key}, {filter}, {window}{group}.",
        "conditional_aggregate": "{agg} of {key} over {predicate}, {filter}, {window}{group}.",
        "avg_time_between": "Avg ms between {first} and next {second}, {filter}, {window}.",
        "sequence_match": "Any of {filter} with {steps} in order {window}{gaps}? yes/no.",
        "count_after_trigger": "Count {target} after the first {trigger}, {filter}, {window}.",
        "conversion_rate": "Fraction of {filter} with {first} that later record {second} {window}.",
        "cross_window_compare": "Mean {key} change for {filter}, {after} compared with {before}.",
        "alternating_pattern_count": "Count {first}->{second}->{first} alternations for {filter} {window}.",
        "state_reached": "Any of {filter} entering {state} {window}? yes/no.",
        "entities_reached_count": "Count of {filter} entering {state} {window}.",
        "count_in_state": "Count {predicate} inside {state}, {filter}, {window}.",
        "state_duration": "Avg total ms inside {state} per entity, {filter}, {window}.",
        "first_passage_time": "Ms until {filter} first enter {state}, {window}.",
        "transition_matrix": "Transition probabilities across {state_defs}, {filter}, {window}.",
        "common_paths": "Top {top_n} paths (len <= {max_len}) across {state_defs}, {filter}, {window}.",
        "loop_count": "Re-entries into {state} for {filter} {window}.",
        "occupancy_distribution": "Share of occupied time per condition {state_defs}, {filter}, {window}.",
        "kpi_in_state": "{fn} inside {state}, {filter}, {window}.",
        "deviation_exists": "Anomalous shift in {key} for {filter} {window} vs baseline {baseline} (>= {threshold:g} sd)? yes/no.",
        "deviation_count": "Count of {filter} with anomalous {key} {window} vs baseline {baseline} (>= {threshold:g} sd).",
        "extreme_entity": "Entity among {filter} with {direction} mean {key} in the anomaly window {window}.",
        "chained": "If {guard_filter} show anomalous {guard_key} {guard_window} vs baseline {guard_baseline}: {inner_question}",
    },
    "verbose": {
        "event_count": "Consider {filter}. Looking only at records {window}, how many {predicate} appear in total{group}?",
        "event_rate": "Consider {filter}. Over the span {window}, what is the number of {predicate} divided by the window length in milliseconds{group}?",
        "windowed_statistic": "Consider {filter} and restrict attention to records {window}. What is the {stat} of the {key} values observed there{group}?",
        "conditional_aggregate": "Consider {filter} and restrict attention to records {window}. Taking only {predicate}, what is the {agg} of their {key} values{group}?",
        "avg_time_between": "For {filter}, pair each occurrence of {first} with the earliest later unmatched {second} {window}. What is the average gap in milliseconds over those pairs?",
        "sequence_match": "For {filter}, scan the records {window}. Is there any entity whose records contain {steps} as an ordered subsequence{gaps}? Answer yes or no.",
        "count_after_trigger": "For {filter}, find the first occurrence of {trigger} {window}. How many {target} occur strictly afterwards in the same span?",
        "conversion_rate": "Among {filter} that record at least one {first} {window}, what fraction later record {second}? Report a value from 0 to 1.",
        "cross_window_compare": "For {filter}, compute the mean {key} over the span {before} and again over the span {after}. By how much did the later mean change relative to the earlier one (later minus earlier)?",
        "alternating_pattern_count": "For {filter}, project records {window} onto the labels {first} and {second}, collapsing repeats. How many complete cycles from {first} to {second} and back to {first} appear, summed over entities?",
        "state_reached": "Define {state} for {filter}. Scanning records {window}, does any entity ever enter it? Answer yes or no.",
        "entities_reached_count": "Define {state} for {filter}. Scanning records {window}, how many distinct entities enter it at least once?",
        "count_in_state": "Define {state} for {filter}. Among records {window} that fall inside that condition, how many are {predicate}?",
        "state_duration": "Define {state} for {filter}. Averaged over the selected entities, how many milliseconds does each spend inside it {window}?",
        "first_passage_time": "Define {state} for {filter}. Measured from the start of the span {window}, how many milliseconds pass before it is first entered, averaged over the entities that do enter it?",
        "transition_matrix": "Define the conditions {state_defs} for {filter}. From the intervals reconstructed {window}, what is the row-normalized matrix of transitions between consecutive conditions?",
        "common_paths": "Define the conditions {state_defs} for {filter}. Over the interval sequences reconstructed {window}, list the {top_n} most frequent contiguous paths of length at most {max_len}.",
        "loop_count": "Define {state} for {filter}. Summed over entities, how many times is it re-entered (visits beyond the first) {window}?",
        "occupancy_distribution": "Define the conditions {state_defs} for {filter}. Of the total occupied time {window}, what fraction falls in each condition?",
        "kpi_in_state": "Define {state} for {filter}. Restricting to records that fall inside it {window}, what is {fn}?",
        "deviation_exists": "Take {filter} and compare the span {window} against the baseline span {baseline}. Does any entity's mean {key} shift by at least {threshold:g} of its own baseline standard deviations? Answer yes or no.",
        "deviation_count": "Take {filter} and compare the span {window} against the baseline span {baseline}. How many entities show a mean {key} shift of at least {threshold:g} of their own baseline standard deviations?",
        "extreme_entity": "Among {filter}, looking only at the anomaly window {window}, which entity id has the {direction} mean {key}?",
        "chained": "First check whether {guard_filter} show a mean shift in {guard_key} of at least {guard_threshold:g} baseline standard deviations {guard_window} relative to the baseline {guard_baseline}. If they do not, the answer is zero or no. If they do: {inner_question}",
    },
}


# Alternate phrasings used when an otherwise plain analysis is asked as
# part of an incident item; they anchor the question to the anomaly
# window so the wording reflects the item's intent.
INCIDENT_OVERLAYS: dict[str, dict[str, str]] = {
    "default": {
        "event_count": "During the incident window {window}, how many {predicate} did {filter} record{group}?",
        "windowed_statistic": "During the incident window {window}, what was the {stat} of {key} for {filter}{group}?",
        "conditional_aggregate": "During the incident window {window}, what was the {agg} of {key} over {predicate} for {filter}{group}?",
    },
    "terse": {
        "event_count": "Count {predicate} for {filter} in the incident window {window}{group}.",
        "windowed_statistic": "{stat} of {key}, {filter}, incident window {window}{group}.",
        "conditional_aggregate": "{agg} of {key} over {predicate}, {filter}, incident window {window}{group}.",
    },
    "verbose": {
        "event_count": "Consider {filter}. Looking only at the incident window {window}, how many {predicate} appear in total{group}?",
        "windowed_statistic": "Consider {filter} and restrict attention to the incident window {window}. What is the {stat} of the {key} values observed there{group}?",
        "conditional_aggregate": "Consider {filter} and restrict attention to the incident window {window}. Taking only {predicate}, what is the {agg} of their {key} values{group}?",
    },
}


def _context(query: QuerySpec, analysis: AnalysisSpec,
             persona: str) -> dict[str, object]:
    params = dict(analysis.params)
    ctx: dict[str, object] = {
        "filter": describe_filter(query.entity_filter),
        "window": describe_window(query.window),
        "group": "",
    }
    if query.group_by:
        ctx["group"] = ", broken down by " + " and ".join(query.group_by)
    kind = analysis.kind
    if "predicate" in params:
        ctx["predicate"] = describe_predicate(query.predicate(params["predicate"]))
    for slot in ("first", "second", "trigger", "target"):
        if slot in params:
            ctx[slot] = describe_predicate(query.predicate(params[slot]))
    if kind == "windowed_statistic":
        ctx["stat"] = _stat_phrase(params)
        ctx["key"] = params["key"]
    if kind == "conditional_aggregate":
        ctx["agg"] = _AGG_WORDS[params["op"]]
        ctx["key"] = params["key"]
    if kind == "sequence_match":
        steps = [describe_predicate(query.predicate(s))
                 for s in params["steps"]]
        ctx["steps"] = ", then ".join(steps)
        gaps = params.get("inter_step_max_ms")
        ctx["gaps"] = ""
        if gaps is not None and any(g is not None for g in gaps):
            bounds = ", ".join(humanize_ms(g) for g in gaps if g is not None)
            ctx["gaps"] = f" (each step within {bounds} of the previous)"
    if kind == "cross_window_compare":
        ctx["key"] = params["key"]
        ctx["before"] = describe_window(params["window_before"])
        ctx["after"] = describe_window(params["window_after"])
    if "state" in params and kind != "windowed_statistic":
        ctx["state"] = _describe_state(query, params, params["state"])
    if "state_defs" in params:
        ctx["state_defs"] = _describe_state_defs(query, params)
    if kind == "common_paths":
        ctx["top_n"] = params["top_n"]
        ctx["max_len"] = params["max_len"]
    if kind == "kpi_in_state":
        ctx["fn"] = _fn_phrase(query, params["fn"])
    if kind in ("deviation_exists", "deviation_count"):
        ctx["key"] = params["key"]
        ctx["baseline"] = describe_window(params["baseline"])
        ctx["threshold"] = float(params["threshold_sigmas"])
    if kind == "extreme_entity":
        ctx["key"] = params["key"]
        ctx["direction"] = "lowest" if params.get("mode") == "min" else "highest"
    if kind == "chained":
        ctx["guard_filter"] = describe_filter(params["guard_filter"])
        ctx["guard_key"] = params["guard_key"]
        ctx["guard_baseline"] = describe_window(params["guard_baseline"])
        ctx["guard_threshold"] = float(params["guard_threshold_sigmas"])
        guard_window = params.get("guard_window") or query.window
        ctx["guard_window"] = describe_window(guard_window)
        inner_q = QuerySpec(query.entity_filter, query.event_predicates,
                            params["inner"], query.window, query.group_by)
        inner_text = render_query(inner_q, persona)
        ctx["inner_question"] = inner_text[0].lower() + inner_text[1:]
    return ctx


def render_query(query: QuerySpec, persona: str = "default",
                 incident: bool = False) -> str:
    """Render a query spec to its question text for one persona."""
    try:
        templates = TEMPLATES[persona]
    except KeyError:
        raise NoTemplate(f"unknown persona {persona!r}")
    analysis = query.analysis
    template = None
    if incident:
        template = INCIDENT_OVERLAYS[persona].get(analysis.kind)
    if template is None:
        template = templates.get(analysis.kind)
    if template is None:
        raise NoTemplate(
            f"no {persona!r} template for analysis kind {analysis.kind!r}")
    ctx = _context(query, analysis, persona)
    return template.format(**ctx)


def render_question(item, persona: str = "default") -> str:
    """Render a QA item's question text.  Deterministic per persona."""
    return render_query(item.query, persona, incident="incident" in item.tags)
