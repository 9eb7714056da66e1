"""tsforge: deterministic synthetic timeseries benchmarks.

Generate multi-entity timeseries datasets from declarative scenarios,
inject ground-truthed incident patterns, evaluate formal queries over
the result, derive question/answer suites, and grade HTTP agents
against them.
"""

from .core import (Dataset, EntityRef, GlobalWindow, MeasurementRecord,
                   PredicatedWindow, StaticProfile, TimeSeries, Violation,
                   resolve_predicated_window, slice_series, validate_dataset)
from .config import ProjectConfig, load_config, parse_config
from .datagen import (EntityTypeSpec, EpochSpec, Exemplar, ExemplarSpec,
                      ObservationSchedule, ScenarioSpec, Seasonality,
                      SignalShape, SignalSpec, StateMachineSpec, Transition,
                      assemble_global, blend_counts, generate_exemplar,
                      sample_from_exemplar)
from .dataio import export_dataset, format_timestamp, import_dataset
from .distributions import Distribution, Domain, sample
from .errors import (BrokenLinkage, ConfigError, DeadEnd, DomainEmpty,
                     EmptyExemplar, EndpointUnusable, ExhaustedRetries,
                     ForgeError, NoTargets, NoTemplate, QueryError, SpecError,
                     WindowOutOfRange)
from .filters import Condition, EntityFilter, EventPredicate, MATCH_ALL
from .harness import (AgentEndpoint, Metrics, RunRecord, accuracy, ask,
                      compute_metrics, grade, pass_at_k, run_suite,
                      self_consistency)
from .patterns import (CascadeSpec, CascadeStage, IncidentManifest, Linkage,
                       PatternSpec, inject, inject_cascade)
from .prng import substream
from .query import AnalysisSpec, QueryResult, QuerySpec, canonical_json, evaluate
from .qa import (QAItem, SuiteConfig, classify_question, export_suite,
                 instantiate_suite, load_suite, render_question)
from .reporting import write_report

__version__ = "0.1.0"

__all__ = [
    "Dataset", "EntityRef", "GlobalWindow", "MeasurementRecord",
    "PredicatedWindow", "StaticProfile", "TimeSeries", "Violation",
    "resolve_predicated_window", "slice_series", "validate_dataset",
    "ProjectConfig", "load_config", "parse_config",
    "EntityTypeSpec", "EpochSpec", "Exemplar", "ExemplarSpec",
    "ObservationSchedule", "ScenarioSpec", "Seasonality", "SignalShape",
    "SignalSpec", "StateMachineSpec", "Transition", "assemble_global",
    "blend_counts", "generate_exemplar", "sample_from_exemplar",
    "export_dataset", "format_timestamp", "import_dataset",
    "Distribution", "Domain", "sample",
    "BrokenLinkage", "ConfigError", "DeadEnd", "DomainEmpty",
    "EmptyExemplar", "EndpointUnusable", "ExhaustedRetries", "ForgeError",
    "NoTargets", "NoTemplate", "QueryError", "SpecError", "WindowOutOfRange",
    "Condition", "EntityFilter", "EventPredicate", "MATCH_ALL",
    "AgentEndpoint", "Metrics", "RunRecord", "accuracy", "ask",
    "compute_metrics", "grade", "pass_at_k", "run_suite", "self_consistency",
    "CascadeSpec", "CascadeStage", "IncidentManifest", "Linkage",
    "PatternSpec", "inject", "inject_cascade",
    "substream",
    "AnalysisSpec", "QueryResult", "QuerySpec", "canonical_json", "evaluate",
    "QAItem", "SuiteConfig", "classify_question", "export_suite",
    "instantiate_suite", "load_suite", "render_question",
    "write_report",
    "__version__",
]
