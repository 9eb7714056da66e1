"""Pluggable question paraphrasing.

A paraphraser proposes alternative wordings; a judge decides whether a
candidate still asks the same question.  The defaults are deterministic
so suites that use them stay reproducible: a phrase-table rewriter and
a judge that demands every number survive and the difficulty tag stay
put.  Callers can swap in anything matching the two protocols (an LLM
rewriter, a human review queue) without touching suite code.
"""

from __future__ import annotations

import json
import re
from dataclasses import replace
from functools import lru_cache
from importlib import resources
from typing import Protocol, runtime_checkable

from .classify import classify_question
from .suite import QAItem


@runtime_checkable
class Paraphraser(Protocol):
    def propose(self, question: str, n: int) -> list[str]:
        ...


@runtime_checkable
class ParaphraseJudge(Protocol):
    def accept(self, original: str, candidate: str) -> bool:
        ...


@lru_cache(maxsize=None)
def _default_table() -> tuple[tuple[str, str], ...]:
    raw = resources.files("tsforge.qa").joinpath("data/synonyms.json")
    data = json.loads(raw.read_text(encoding="utf-8"))
    return tuple((phrase, alts[0]) for phrase, alts in data.items())


class SynonymParaphraser:
    """Rewrites one phrase per variant, then all phrases at once."""

    def __init__(self, table: tuple[tuple[str, str], ...] | None = None):
        self.table = table if table is not None else _default_table()

    def _applicable(self, question: str) -> list[tuple[str, str]]:
        low = question.lower()
        return [(p, s) for p, s in self.table
                if re.search(rf"\b{re.escape(p)}\b", low)]

    @staticmethod
    def _swap(question: str, phrase: str, sub: str) -> str:
        pattern = re.compile(rf"\b{re.escape(phrase)}\b", re.IGNORECASE)

        def fix(m: re.Match) -> str:
            return sub.capitalize() if m.group(0)[0].isupper() else sub

        return pattern.sub(fix, question)

    def propose(self, question: str, n: int) -> list[str]:
        hits = self._applicable(question)
        out: list[str] = []
        for phrase, sub in hits[:n]:
            out.append(self._swap(question, phrase, sub))
        if len(out) < n and len(hits) > 1:
            everything = question
            for phrase, sub in hits:
                everything = self._swap(everything, phrase, sub)
            if everything not in out:
                out.append(everything)
        return [v for v in out if v != question][:n]


_NUM = re.compile(r"\d+(?:\.\d+)?")


class TokenPreservingJudge:
    """Accepts a rewrite only if every numeric token survives and the
    classifier still assigns the same tag."""

    def accept(self, original: str, candidate: str) -> bool:
        if sorted(_NUM.findall(original)) != sorted(_NUM.findall(candidate)):
            return False
        return classify_question(candidate) == classify_question(original)


def paraphrase_item(item: QAItem, n: int = 2,
                    paraphraser: Paraphraser | None = None,
                    judge: ParaphraseJudge | None = None) -> tuple[QAItem, ...]:
    """Accepted paraphrases of an item, as new items sharing its query,
    answer and tags.  Ids get a ``-pN`` suffix."""
    paraphraser = paraphraser or SynonymParaphraser()
    judge = judge or TokenPreservingJudge()
    out = []
    accepted = 0
    for candidate in paraphraser.propose(item.question, n):
        if judge.accept(item.question, candidate):
            accepted += 1
            out.append(replace(item, item_id=f"{item.item_id}-p{accepted}",
                               question=candidate))
    return tuple(out)
