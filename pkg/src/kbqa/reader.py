"""Rank a passage's candidate spans and return the top span's KB object.

The lexical baseline scores each span by content-word overlap between the
question and the span's containing sentence; the remote reader asks the
model server for one score per candidate.  Both rank objects identically,
so they are drop-in replacements for each other.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

from .errors import NoCandidatesError, ScoreCountMismatchError
from .kb import KbObject
from .matching import fold, lexical_similarity
from .passage import CandidateSpan, Passage

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .evaluation import Question

# minimal built-in function-word lists, keyed by primary language subtag;
# callers can extend per config
STOPWORDS: dict[str, frozenset[str]] = {
    "en": frozenset(
        """
        a an the of in on at by for to from with about into over under after
        before between as is are was were be been being am do does did done
        has have had having will would can could shall should may might must
        and or nor not no but if then than so such it its this that these
        those he him his she her hers they them their theirs we us our ours
        you your yours i me my mine who whom whose what which when where why
        how there here s
        """.split()
    ),
    "zh": frozenset("的 了 是 在 吗 呢 什么 谁 哪 哪里 何时 怎么".split()),
}


@dataclass(frozen=True)
class SpanScore:
    span: CandidateSpan
    score: float


@dataclass(frozen=True)
class Prediction:
    question_id: str
    ranked: tuple[tuple[KbObject, float], ...]
    top: KbObject

    def to_json(self) -> dict:
        return {
            "id": self.question_id,
            "top": self.top.to_json(),
            "ranked": [
                {"object": o.to_json(), "score": s} for o, s in self.ranked
            ],
        }


def normalize_token(token: str) -> str:
    return token.strip(
        "".join(c for c in token if unicodedata.category(c).startswith("P"))
    ).casefold()


def _tokens(text: str) -> list[str]:
    out = []
    for raw in text.split():
        tok = normalize_token(raw)
        if tok:
            out.append(tok)
    return out


def content_words(
    text: str,
    language: str = "en",
    extra_stopwords: Mapping[str, frozenset[str]] | None = None,
) -> set[str]:
    """Case-folded, punctuation-stripped tokens minus function words."""
    primary = (language or "en").split("-")[0].split("_")[0].lower()
    stop = set(STOPWORDS.get(primary, frozenset()))
    if extra_stopwords and primary in extra_stopwords:
        stop |= set(extra_stopwords[primary])
    return {t for t in _tokens(text) if t not in stop}


def _rank_objects(
    question_text: str,
    passage: Passage,
    spans: Sequence[CandidateSpan],
    scores: Sequence[float],
) -> list[tuple[KbObject, float, CandidateSpan]]:
    """Aggregate per object by max score, then order objects deterministically.

    Ties are broken by the rank of the containing sentence and then by the
    earlier in-sentence offset.  Sentence rank is measured by similarity to
    the question (the quantity passage ordering is built from), not by
    position, so a reordered copy of the same passage ranks objects
    identically; on a freshly built passage the two coincide whenever
    sentence similarities are distinct.
    """
    sims = [lexical_similarity(question_text, u.text) for u in passage.sentences]
    order = sorted(
        range(len(passage.sentences)),
        key=lambda i: (-sims[i], fold(passage.sentences[i].text)),
    )
    sentence_rank = {i: r for r, i in enumerate(order)}
    starts: list[int] = []
    pos = 0
    for unit in passage.sentences:
        starts.append(pos)
        pos += len(unit.text) + 1

    def span_key(span: CandidateSpan) -> tuple:
        local_start = span.start - starts[span.sentence_index]
        return (
            sentence_rank[span.sentence_index],
            local_start,
            fold(span.surface),
            span.object.is_literal,
            span.object.value,
        )

    best: dict[KbObject, tuple[float, CandidateSpan]] = {}
    for span, score in zip(spans, scores):
        key = span.object
        current = best.get(key)
        if (
            current is None
            or score > current[0]
            or (score == current[0] and span_key(span) < span_key(current[1]))
        ):
            best[key] = (max(score, current[0]) if current else score, span)
    return sorted(
        ((obj, sc, sp) for obj, (sc, sp) in best.items()),
        key=lambda row: (-row[1], span_key(row[2])),
    )


def score_spans_lexical(
    question_text: str,
    language: str,
    passage: Passage,
    extra_stopwords: Mapping[str, frozenset[str]] | None = None,
) -> list[SpanScore]:
    question_words = content_words(question_text, language, extra_stopwords)
    sentence_tokens = [set(_tokens(u.text)) for u in passage.sentences]
    scored = []
    for span in passage.spans:
        own = set(_tokens(span.surface))
        overlap = question_words & (sentence_tokens[span.sentence_index] - own)
        scored.append(SpanScore(span=span, score=float(len(overlap))))
    return scored


def read_lexical(
    question: "Question",
    passage: Passage,
    extra_stopwords: Mapping[str, frozenset[str]] | None = None,
) -> Prediction:
    """Deterministic reader: content-word overlap with the containing sentence.

    A span's own tokens never count toward its score, so a candidate cannot
    vouch for itself; scores therefore depend only on the sentence each span
    lives in, not on where that sentence sits in the passage.
    """
    if not passage.spans:
        raise NoCandidatesError(f"question {question.id}: empty span table")
    scored = score_spans_lexical(
        question.text, question.language, passage, extra_stopwords
    )
    ranked = _rank_objects(
        question.text, passage, [s.span for s in scored], [s.score for s in scored]
    )
    return Prediction(
        question_id=question.id,
        ranked=tuple((obj, sc) for obj, sc, _ in ranked),
        top=ranked[0][0],
    )


def read_remote(question: "Question", passage: Passage, client) -> Prediction:
    """Rank candidates with scores from the model server's /read endpoint."""
    if not passage.spans:
        raise NoCandidatesError(f"question {question.id}: empty span table")
    candidates = [(s.start, s.end) for s in passage.spans]
    scores = client.read(question.text, passage.text, candidates)
    if len(scores) != len(candidates):
        raise ScoreCountMismatchError(
            f"expected {len(candidates)} scores, got {len(scores)}"
        )
    ranked = _rank_objects(
        question.text, passage, passage.spans, [float(s) for s in scores]
    )
    return Prediction(
        question_id=question.id,
        ranked=tuple((obj, sc) for obj, sc, _ in ranked),
        top=ranked[0][0],
    )
