from .classify import classify_question, corpus_accuracy, load_corpus, TAGS
from .facts import DatasetFacts, collect_facts
from .incidents import (DerivedQuery, derive_incident_queries,
                        derive_incident_variants, incident_pool)
from .paraphrase import (Paraphraser, ParaphraseJudge, SynonymParaphraser,
                         TokenPreservingJudge, paraphrase_item)
from .render import (PERSONAS, describe_filter, describe_predicate,
                     describe_window, humanize_ms, iso, render_query,
                     render_question)
from .suite import (QAItem, SuiteConfig, answer_type_of, export_suite,
                    instantiate_suite, item_from_json, item_to_json,
                    load_suite, suite_counts, tolerance_of)

__all__ = [
    "classify_question", "corpus_accuracy", "load_corpus", "TAGS",
    "DatasetFacts", "collect_facts",
    "DerivedQuery", "derive_incident_queries", "derive_incident_variants",
    "incident_pool",
    "Paraphraser", "ParaphraseJudge", "SynonymParaphraser",
    "TokenPreservingJudge", "paraphrase_item",
    "PERSONAS", "describe_filter", "describe_predicate", "describe_window",
    "humanize_ms", "iso", "render_query", "render_question",
    "QAItem", "SuiteConfig", "answer_type_of", "export_suite",
    "instantiate_suite", "item_from_json", "item_to_json", "load_suite",
    "suite_counts", "tolerance_of",
]
