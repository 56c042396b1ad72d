"""Assemble question-specific passages with a grounded candidate-span table.

Sentences are ranked by similarity to the question, trimmed to a word
budget, and every KB object mentioned by a kept sentence is located with
the fuzzy matcher so each candidate span maps back to exactly one KB
object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import NoCandidatesError
from .kb import KbObject
from .matching import (
    FuzzyMatch,
    LexicalSimilarity,
    RemoteSimilarity,
    fuzzy_find,
    lexical_similarity,
)
from .verbalize import VerbalizedUnit

__all__ = [
    "CandidateSpan",
    "Passage",
    "build",
    "fuzzy_find",
    "similarity",
    "LexicalSimilarity",
    "RemoteSimilarity",
    "FuzzyMatch",
]


@dataclass(frozen=True)
class CandidateSpan:
    sentence_index: int
    start: int
    end: int
    object: KbObject
    surface: str
    match_score: float

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "object": self.object.to_json(),
            "surface": self.surface,
            "score": self.match_score,
            "sentence_index": self.sentence_index,
        }

    @staticmethod
    def from_json(obj: dict) -> "CandidateSpan":
        return CandidateSpan(
            sentence_index=obj.get("sentence_index", 0),
            start=obj["start"],
            end=obj["end"],
            object=KbObject.from_json(obj["object"]),
            surface=obj["surface"],
            match_score=obj["score"],
        )


@dataclass(frozen=True)
class Passage:
    """Budget-trimmed, similarity-ordered sentences with a global span table."""

    question_id: str
    text: str
    sentences: tuple[VerbalizedUnit, ...]
    spans: tuple[CandidateSpan, ...]
    word_count: int
    dropped_objects: int = field(default=0, compare=False)

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "text": self.text,
            "spans": [s.to_json() for s in self.spans],
            "word_count": self.word_count,
            "sentences": [u.to_json() for u in self.sentences],
        }

    @staticmethod
    def from_json(obj: dict) -> "Passage":
        return Passage(
            question_id=obj["question_id"],
            text=obj["text"],
            sentences=tuple(
                VerbalizedUnit.from_json(u) for u in obj.get("sentences", [])
            ),
            spans=tuple(CandidateSpan.from_json(s) for s in obj["spans"]),
            word_count=obj.get("word_count", len(obj["text"].split())),
        )


def similarity(question: str, sentence: str, backend=None) -> float:
    """Similarity in [0, 1] between a question and one sentence."""
    if backend is None:
        return lexical_similarity(question, sentence)
    return backend.similarities(question, [sentence])[0]


def assemble(
    question_id: str,
    ordered_units: Sequence[VerbalizedUnit],
    threshold: float = 85.0,
    budget_words: int | None = None,
) -> Passage:
    """Join already-ordered sentences and ground their objects.

    Exposed separately from :func:`build` so a passage can be recomposed in
    any sentence order (for order-sensitivity experiments) with offsets
    recomputed consistently.
    """
    included: list[VerbalizedUnit] = []
    words = 0
    for unit in ordered_units:
        unit_words = len(unit.text.split())
        if budget_words is not None and words + unit_words > budget_words:
            break
        included.append(unit)
        words += unit_words

    parts: list[str] = []
    offsets: list[int] = []
    pos = 0
    for unit in included:
        offsets.append(pos)
        parts.append(unit.text)
        pos += len(unit.text) + 1  # single joining space
    text = " ".join(parts)

    spans: list[CandidateSpan] = []
    dropped = 0
    for idx, unit in enumerate(included):
        base = offsets[idx]
        for obj, surface in unit.objects:
            match = fuzzy_find(surface, unit.text, threshold)
            if match is None:
                dropped += 1
                continue
            start, end = base + match.start, base + match.end
            spans.append(
                CandidateSpan(
                    sentence_index=idx,
                    start=start,
                    end=end,
                    object=obj,
                    surface=text[start:end],
                    match_score=match.score,
                )
            )
    return Passage(
        question_id=question_id,
        text=text,
        sentences=tuple(included),
        spans=tuple(spans),
        word_count=len(text.split()),
        dropped_objects=dropped,
    )


def build(
    question_id: str,
    question_text: str,
    units: Sequence[VerbalizedUnit],
    budget_words: int = 750,
    threshold: float = 85.0,
    backend=None,
) -> Passage:
    """Rank, trim, and ground verbalized sentences into one passage.

    Duplicate sentence texts are collapsed first (merged templates can
    collide), then sentences are sorted by similarity to the question
    (stable, so equal scores keep input order) and the passage keeps the
    longest prefix that fits the whitespace-token budget whole-sentence.
    An empty final span table raises NoCandidates: the passage cannot
    answer anything.
    """
    if not units:
        raise NoCandidatesError(f"question {question_id}: no verbalized units")
    deduped: list[VerbalizedUnit] = []
    seen_texts: set[str] = set()
    for u in units:
        if u.text in seen_texts:
            continue
        seen_texts.add(u.text)
        deduped.append(u)

    backend = backend or LexicalSimilarity()
    scores = backend.similarities(question_text, [u.text for u in deduped])
    order = sorted(range(len(deduped)), key=lambda i: (-scores[i], i))
    ordered = [deduped[i] for i in order]

    passage = assemble(question_id, ordered, threshold=threshold, budget_words=budget_words)
    if not passage.spans:
        raise NoCandidatesError(
            f"question {question_id}: no candidate span survived grounding"
        )
    return passage
