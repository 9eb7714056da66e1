"""Agent test integration.

Each suite question is POSTed to an HTTP endpoint in a one-shot
setting, repeated over independent trials.  Every transport or
protocol fault becomes a runtime_error record rather than an exception;
grading is containment-based and pure.  Metrics follow the benchmark
definitions: accuracy over all (item, trial) pairs, pass@k over the
first k trials of each item, and self-consistency as the mean majority
share of the per-item category labels.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter
from typing import Mapping, Sequence

import requests

from .errors import SpecError
from .qa.suite import QAItem

CATEGORIES = ("correct", "incorrect", "runtime_error")

AFFIRMATIVE = ("yes", "true", "affirmative", "indeed", "confirmed")
NEGATIVE = ("no", "false", "negative", "not", "never", "none", "nothing")


@dataclass(frozen=True)
class AgentEndpoint:
    base_url: str
    path: str = "/ask"
    headers: Mapping[str, str] = field(default_factory=dict)
    question_field: str = "question"
    answer_path: str = "answer"
    timeout_ms: int = 30000
    max_parallel: int = 4

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise SpecError("endpoint timeout must be positive")
        if self.max_parallel < 1:
            raise SpecError("max_parallel must be at least 1")

    def url(self) -> str:
        return self.base_url.rstrip("/") + "/" + self.path.lstrip("/")


@dataclass(frozen=True)
class RunRecord:
    item_id: str
    trial_index: int
    raw_response: str
    category: str
    latency_ms: float


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    pass_at_k: float
    k: int
    self_consistency: float
    breakdowns: Mapping[str, Mapping[str, float]]


def _extract(payload: object, path: str) -> object:
    node = payload
    for part in path.split("."):
        if isinstance(node, Mapping):
            if part not in node:
                return None
            node = node[part]
        elif isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                return None
        else:
            return None
    return node


def ask(endpoint: AgentEndpoint, question: str) -> tuple[str | None, float]:
    """POST one question; returns (answer text or None on fault, latency).

    A missing answer field, non-2xx status, malformed JSON body,
    timeout or connection failure all yield None; nothing is raised.
    """
    body = {endpoint.question_field: question}
    start = perf_counter()
    try:
        resp = requests.post(endpoint.url(), json=body,
                             headers=dict(endpoint.headers),
                             timeout=endpoint.timeout_ms / 1000.0)
        latency = (perf_counter() - start) * 1000.0
        if not 200 <= resp.status_code < 300:
            return None, latency
        payload = resp.json()
        answer = _extract(payload, endpoint.answer_path)
        if answer is None:
            return None, latency
        return str(answer), latency
    except (requests.RequestException, ValueError):
        return None, (perf_counter() - start) * 1000.0


# ---------------------------------------------------------------------------
# grading

_NUMERIC = re.compile(
    r"[-+]?\d{1,3}(?:,\d{3})+(?:\.\d+)?%?"
    r"|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?%?")

_WORD = re.compile(r"[a-z]+")


def numeric_candidates(raw: str) -> list[float]:
    """Every numeric literal in the text; a trailing % contributes both
    the face value and the /100 reading."""
    out: list[float] = []
    for token in _NUMERIC.findall(raw):
        is_pct = token.endswith("%")
        token = token.rstrip("%").replace(",", "")
        try:
            value = float(token)
        except ValueError:
            continue
        out.append(value)
        if is_pct:
            out.append(value / 100.0)
    return out


def _close(candidate: float, truth: float, tolerance: float) -> bool:
    return abs(candidate - truth) <= max(tolerance * abs(truth), 1e-9)


def _normalize(text: str) -> str:
    return re.sub(r"\s+", " ", text.casefold()).strip()


def _grade_number(raw: str, truth: float, tolerance: float) -> bool:
    return any(_close(c, float(truth), tolerance)
               for c in numeric_candidates(raw))


def _grade_boolean(raw: str, truth: bool) -> bool:
    for word in _WORD.findall(raw.casefold()):
        if word in AFFIRMATIVE:
            return truth is True
        if word in NEGATIVE:
            return truth is False
    return False


def _grade_text(raw: str, truth: str) -> bool:
    return _normalize(truth) in _normalize(raw)


def _leaves(value: object) -> list[object]:
    if isinstance(value, Mapping):
        out: list[object] = []
        for key, sub in value.items():
            if isinstance(key, str):
                # grouped results key rows by a JSON array of attribute
                # values; grade the attribute values, not the brackets
                try:
                    parts = json.loads(key)
                except (ValueError, TypeError):
                    parts = key
                if isinstance(parts, list):
                    out.extend(parts)
                else:
                    out.append(key)
            out.extend(_leaves(sub))
        return out
    if isinstance(value, (list, tuple)):
        out = []
        for sub in value:
            out.extend(_leaves(sub))
        return out
    return [value]


def _grade_table(raw: str, item: QAItem) -> bool:
    value = item.answer.value
    # unwrap structural shells so grading demands the content, not the
    # container field names
    if item.answer.kind == "grouped":
        value = value.get("values", {})
    elif item.answer.kind == "matrix":
        value = [value.get("states", []), value.get("rows", [])]
    leaves = _leaves(value)
    if not leaves:
        return False
    for leaf in leaves:
        if isinstance(leaf, bool):
            continue
        if isinstance(leaf, (int, float)):
            if not _grade_number(raw, float(leaf), item.tolerance or 1e-3):
                return False
        elif isinstance(leaf, str):
            if not _grade_text(raw, leaf):
                return False
    return True


def grade(raw: str | None, item: QAItem) -> str:
    """Categorize one response: correct, incorrect or runtime_error."""
    if raw is None:
        return "runtime_error"
    if item.answer_type == "number":
        ok = _grade_number(raw, float(item.answer.value), item.tolerance)
    elif item.answer_type == "boolean":
        ok = _grade_boolean(raw, bool(item.answer.value))
    elif item.answer_type == "text":
        ok = _grade_text(raw, str(item.answer.value))
    else:
        ok = _grade_table(raw, item)
    return "correct" if ok else "incorrect"


# ---------------------------------------------------------------------------
# suite execution

def run_suite(suite: Sequence[QAItem], endpoint: AgentEndpoint,
              n_trials: int = 3, seed: int = 0) -> list[RunRecord]:
    """Ask every item n_trials times; bounded parallelism, deterministic
    (item, trial) output order regardless of completion order.

    The seed is reserved for pluggable local answerers; HTTP runs do
    not consume randomness.
    """
    del seed
    if n_trials < 1:
        raise SpecError("n_trials must be at least 1")
    jobs = [(i, t) for i in range(len(suite)) for t in range(n_trials)]
    results: dict[tuple[int, int], tuple[str | None, float]] = {}
    with ThreadPoolExecutor(max_workers=endpoint.max_parallel) as pool:
        futures = {pool.submit(ask, endpoint, suite[i].question): (i, t)
                   for i, t in jobs}
        for future, key in futures.items():
            results[key] = future.result()
    records = []
    for i, t in jobs:
        raw, latency = results[(i, t)]
        records.append(RunRecord(suite[i].item_id, t,
                                 raw if raw is not None else "",
                                 grade(raw, suite[i]), latency))
    return records


def _by_item(records: Sequence[RunRecord]) -> dict[str, list[RunRecord]]:
    out: dict[str, list[RunRecord]] = {}
    for rec in records:
        out.setdefault(rec.item_id, []).append(rec)
    for trials in out.values():
        trials.sort(key=lambda r: r.trial_index)
    return out


def accuracy(records: Sequence[RunRecord]) -> float:
    if not records:
        return 0.0
    return sum(r.category == "correct" for r in records) / len(records)


def pass_at_k(records: Sequence[RunRecord], k: int) -> float:
    """Fraction of items with a correct answer in their first k trials."""
    if k < 1:
        raise SpecError("k must be at least 1")
    grouped = _by_item(records)
    if not grouped:
        return 0.0
    hits = sum(
        any(r.category == "correct" for r in trials[:k])
        for trials in grouped.values())
    return hits / len(grouped)


def self_consistency(records: Sequence[RunRecord]) -> float:
    """Mean over items of (majority category count / trials)."""
    grouped = _by_item(records)
    if not grouped:
        return 0.0
    shares = []
    for trials in grouped.values():
        counts: dict[str, int] = {}
        for r in trials:
            counts[r.category] = counts.get(r.category, 0) + 1
        shares.append(max(counts.values()) / len(trials))
    return sum(shares) / len(shares)


def compute_metrics(records: Sequence[RunRecord], suite: Sequence[QAItem],
                    k: int = 2) -> Metrics:
    tag_of = {item.item_id: item.primary_tag() for item in suite}
    breakdowns: dict[str, dict[str, float]] = {}
    for tag in sorted({t for t in tag_of.values()}):
        subset = [r for r in records if tag_of.get(r.item_id) == tag]
        if not subset:
            continue
        breakdowns[tag] = {
            "accuracy": accuracy(subset),
            "pass_at_k": pass_at_k(subset, k),
            "self_consistency": self_consistency(subset),
            "items": float(len({r.item_id for r in subset})),
        }
    return Metrics(accuracy=accuracy(records),
                   pass_at_k=pass_at_k(records, k), k=k,
                   self_consistency=self_consistency(records),
                   breakdowns=breakdowns)
