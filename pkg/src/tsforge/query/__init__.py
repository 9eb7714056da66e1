"""Formal query model: filters, predicates, analyses, evaluation."""

from ..filters import Condition, EntityFilter, EventPredicate
from .evaluate import evaluate, resolve_scopes, select_series
from .incident import (deviation_count, deviation_exists, deviation_sigmas,
                       extreme_entity, is_deviant)
from .occupancy import (StateDef, StateOccupancy, common_paths,
                        count_in_state, first_passage_time, kpi_in_state,
                        loop_count, occupancy_distribution,
                        pooled_occupancy_distribution, reconstruct_occupancy,
                        restrict_to_state, state_duration, state_reached,
                        transition_matrix)
from .spec import (ANALYSIS_KINDS, STATEFUL_KINDS, AnalysisSpec, QueryResult,
                   QuerySpec, analysis_from_json, analysis_to_json,
                   canonical_json, query_from_canonical, query_from_json,
                   query_to_json, result_from_json, result_to_json)
from .stateful import (alternating_pattern_count, avg_time_between,
                       conversion_rate, count_after_trigger,
                       cross_window_compare, matched_pairs, sequence_match)
from .stateless import (conditional_aggregate, event_count, event_rate,
                        numeric_values, percentile, pooled_statistic,
                        windowed_statistic)

__all__ = [
    "ANALYSIS_KINDS", "STATEFUL_KINDS",
    "AnalysisSpec", "Condition", "EntityFilter", "EventPredicate",
    "QueryResult", "QuerySpec", "StateDef", "StateOccupancy",
    "alternating_pattern_count", "analysis_from_json", "analysis_to_json",
    "avg_time_between", "canonical_json", "common_paths",
    "conditional_aggregate", "conversion_rate", "count_after_trigger",
    "count_in_state", "cross_window_compare", "deviation_count",
    "deviation_exists", "deviation_sigmas", "evaluate", "event_count",
    "event_rate", "extreme_entity", "first_passage_time", "is_deviant",
    "kpi_in_state", "loop_count", "matched_pairs", "numeric_values",
    "occupancy_distribution", "percentile", "pooled_occupancy_distribution",
    "pooled_statistic", "query_from_canonical", "query_from_json",
    "query_to_json", "reconstruct_occupancy", "resolve_scopes",
    "restrict_to_state", "result_from_json", "result_to_json",
    "select_series", "sequence_match", "state_duration", "state_reached",
    "transition_matrix", "windowed_statistic",
]
