"""Map questions to topic entities: gold passthrough, surface matching, or
precomputed links from an external tool."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

from .errors import GoldMismatchError, MissingGoldError
from .kb import KbId, KnowledgeBase
from .matching import fuzzy_find

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .evaluation import Question


@dataclass(frozen=True)
class LinkCandidate:
    entity: KbId
    start: int
    end: int
    score: float

    def to_json(self) -> dict:
        return {
            "entity": self.entity,
            "start": self.start,
            "end": self.end,
            "score": self.score,
        }


@dataclass(frozen=True)
class LinkResult:
    question_id: str
    candidates: tuple[LinkCandidate, ...]

    def entity_ids(self) -> list[KbId]:
        return [c.entity for c in self.candidates]

    def to_json(self) -> dict:
        return {
            "id": self.question_id,
            "candidates": [c.to_json() for c in self.candidates],
        }


def link_golden(question: "Question") -> LinkResult:
    """Pass through the dataset's annotated topic entities, score 100.

    Never inspects the question text, so it works for any question language
    by construction.  Offsets use the (0, 0) sentinel: there is no matched
    span to point at.
    """
    if not question.topic_entities:
        raise MissingGoldError(f"question {question.id} has no topic entities")
    seen: set[KbId] = set()
    candidates = []
    for entity in question.topic_entities:
        if entity in seen:
            continue
        seen.add(entity)
        candidates.append(LinkCandidate(entity=entity, start=0, end=0, score=100.0))
    return LinkResult(question_id=question.id, candidates=tuple(candidates))


def link_surface(
    question_text: str,
    kb: KnowledgeBase,
    k: int = 5,
    threshold: float = 85.0,
    question_id: str = "",
) -> LinkResult:
    """Match every KB surface form against the question with the fuzzy kernel.

    Candidates keep the best-scoring surface per entity; the top-k with
    score >= threshold are returned, ties broken by longer matched span and
    then lexicographic entity id.
    """
    best: dict[KbId, LinkCandidate] = {}
    for surface in kb.aliases:
        match = fuzzy_find(surface, question_text, threshold)
        if match is None:
            continue
        for entity in kb.aliases[surface]:
            cand = LinkCandidate(
                entity=entity, start=match.start, end=match.end, score=match.score
            )
            old = best.get(entity)
            if old is None or _cand_rank(cand) < _cand_rank(old):
                best[entity] = cand
    ranked = sorted(best.values(), key=_cand_rank)
    return LinkResult(question_id=question_id, candidates=tuple(ranked[:k]))


def _cand_rank(c: LinkCandidate) -> tuple[float, int, str]:
    return (-c.score, -(c.end - c.start), c.entity)


def recall_at_k(
    results: list[LinkResult],
    gold: Mapping[str, set[KbId]],
    k: int,
) -> float:
    """Fraction of questions with any gold entity among the top-k candidates."""
    if not results:
        return 0.0
    hits = 0
    for result in results:
        if result.question_id not in gold:
            raise GoldMismatchError(f"no gold entities for question {result.question_id}")
        gold_ids = gold[result.question_id]
        top = result.entity_ids()[:k]
        if any(e in gold_ids for e in top):
            hits += 1
    return hits / len(results)


def load_precomputed_links(path: str) -> dict[str, LinkResult]:
    """Load links produced by an external tool (JSON Lines, one per question).

    Candidates are re-sorted by descending score to restore the LinkResult
    ordering invariant; offsets default to the (0, 0) sentinel.
    """
    out: dict[str, LinkResult] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            candidates = [
                LinkCandidate(
                    entity=c["entity"],
                    start=int(c.get("start", 0)),
                    end=int(c.get("end", 0)),
                    score=float(c.get("score", 0.0)),
                )
                for c in record.get("candidates", [])
            ]
            candidates.sort(key=_cand_rank)
            qid = str(record["id"])
            out[qid] = LinkResult(question_id=qid, candidates=tuple(candidates))
    return out
