"""Rule-based difficulty tagging for benchmark questions.

A question is tagged by inspecting its text and, when one is supplied,
its SQL translation:

* incident wins whenever the incident lexicon matches either the text
  or the SQL;
* with SQL present, windowing constructs (LAG/LEAD, OVER(...),
  MATCH_RECOGNIZE, ROW_NUMBER) or a self-join that compares the same
  timestamp column across two aliases mark the question stateful;
* without SQL, a keyword list over the text decides stateful;
* everything else is stateless.

Keyword matches are whole-word (underscores count as word characters,
so "device_state" does not trigger on "state").
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

TAGS = ("stateless", "stateful", "incident")


@lru_cache(maxsize=None)
def _keyword_tables() -> dict[str, tuple[str, ...]]:
    raw = resources.files("tsforge.qa").joinpath("data/keywords.json")
    data = json.loads(raw.read_text(encoding="utf-8"))
    return {k: tuple(v) for k, v in data.items()}


@lru_cache(maxsize=None)
def _pattern(group: str) -> re.Pattern[str]:
    words = _keyword_tables()[group]
    alts = "|".join(re.escape(w) for w in words)
    return re.compile(rf"\b(?:{alts})\b")


def _matches(group: str, text: str) -> bool:
    return bool(_pattern(group).search(text.lower()))


def _sql_is_stateful(sql: str) -> bool:
    s = re.sub(r"\s+", " ", sql.lower())
    if any(marker in s for marker in _keyword_tables()["sql_window"]):
        return True
    if re.search(r"\bover\s*\(", s):
        return True
    if " join " in f" {s} ":
        # ordered self-join: the same column compared across two aliases
        if re.search(r"\b(\w+)\.(\w+)\s*[<>]=?\s*(\w+)\.\2\b", s):
            return True
    return False


def classify_question(text: str, sql: str | None = None) -> str:
    """Return "incident", "stateful" or "stateless" for one question."""
    if _matches("incident", text) or (sql and _matches("incident", sql)):
        return "incident"
    if sql is not None and sql.strip():
        return "stateful" if _sql_is_stateful(sql) else "stateless"
    if _matches("stateful", text):
        return "stateful"
    return "stateless"


def load_corpus() -> list[dict]:
    """The bundled labelled mini-corpus used by the classifier tests."""
    raw = resources.files("tsforge.qa").joinpath("data/classifier_corpus.json")
    return json.loads(raw.read_text(encoding="utf-8"))


def corpus_accuracy() -> float:
    corpus = load_corpus()
    hits = sum(1 for row in corpus
               if classify_question(row["question"], row["sql"]) == row["label"])
    return hits / len(corpus)
