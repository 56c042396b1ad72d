"""String-matching kernels: fuzzy span location and lexical similarity.

One fuzzy matcher serves the whole pipeline (span grounding, remote-output
validation, surface-form entity linking) so there is a single tested
implementation of string similarity in the repo.
"""

from __future__ import annotations

from collections import Counter
from math import sqrt
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyNeedleError


def fold(text: str) -> str:
    """Case-fold without changing the string length.

    Characters whose case folding expands (e.g. sharp s) are kept as-is so
    matched offsets always map back into the original string.
    """
    out = []
    for ch in text:
        f = ch.casefold()
        out.append(f if len(f) == 1 else ch)
    return "".join(out)


class FuzzyMatch(NamedTuple):
    start: int
    end: int
    score: float


def _length_window(needle_len: int) -> tuple[int, int]:
    # candidate lengths within +-30% of the needle, integer arithmetic so
    # the bounds never drift with float rounding
    lo = max(1, (7 * needle_len + 9) // 10)
    hi = (13 * needle_len) // 10
    return lo, hi


def fuzzy_find(needle: str, haystack: str, threshold: float = 85.0) -> FuzzyMatch | None:
    """Best approximate occurrence of ``needle`` inside ``haystack``.

    Scores every case-folded substring whose length is within +-30% of the
    needle with ``100 * (1 - edit_distance / max(len(needle), len(sub)))``
    and returns the best one, or None when the best score is below
    ``threshold``.  Ties go to the earliest start, then the shortest match.

    The search runs one dynamic program per needle character over a
    (starts x window) matrix, so cost is O(|needle| * |haystack| * window)
    cells in vectorized batches rather than per-substring rescans.
    """
    if not needle:
        raise EmptyNeedleError("needle must be non-empty")
    n = len(needle)
    lo, hi = _length_window(n)
    h = len(haystack)
    if h < lo:
        return None

    needle_f = fold(needle)
    hay_f = fold(haystack)

    hay_codes = np.frombuffer(hay_f.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)
    n_starts = h - lo + 1
    width = min(hi, h)

    # windows[i, k] = code of haystack[i + k], sentinel -1 past the end
    idx = np.arange(n_starts)[:, None] + np.arange(width)[None, :]
    valid = idx < h
    windows = np.where(valid, hay_codes[np.minimum(idx, h - 1)], -1)

    # dist[i, k] = edit distance between the needle prefix processed so far
    # and haystack[i : i + k]
    base = np.arange(width + 1, dtype=np.int64)
    dist = np.broadcast_to(base, (n_starts, width + 1)).copy()
    for ch in needle_f:
        cost = (windows != ord(ch)).astype(np.int64)
        stepped = np.empty_like(dist)
        stepped[:, 0] = dist[:, 0] + 1
        stepped[:, 1:] = np.minimum(dist[:, 1:] + 1, dist[:, :-1] + cost)
        # close insertions: running minimum of (value - position) + position
        shifted = stepped - base
        np.minimum.accumulate(shifted, axis=1, out=shifted)
        dist = shifted + base

    lengths = np.arange(lo, width + 1, dtype=np.int64)
    if lengths.size == 0:
        return None
    d = dist[:, lo:].astype(np.float64)
    max_len = np.maximum(lengths, n).astype(np.float64)
    scores = 100.0 * (1.0 - d / max_len)
    ends = np.arange(n_starts)[:, None] + lengths[None, :]
    scores[ends > h] = -np.inf

    flat = int(np.argmax(scores))  # row-major: earliest start, then shortest
    best = float(scores.flat[flat])
    if best == -np.inf or best < threshold:
        return None
    i, j = divmod(flat, lengths.size)
    return FuzzyMatch(start=i, end=i + int(lengths[j]), score=best)


# -- lexical similarity ------------------------------------------------------


def char_trigrams(text: str) -> Counter:
    folded = fold(text)
    return Counter(folded[i : i + 3] for i in range(len(folded) - 2))


def lexical_similarity(a: str, b: str) -> float:
    """Cosine over character 3-gram counts of case-folded text.

    Script-agnostic: needs no tokenizer, so it behaves sensibly for
    languages without whitespace word boundaries.  Strings shorter than
    three characters carry no 3-grams; they only match by exact folded
    equality.
    """
    if not a or not b:
        raise ValueError("similarity inputs must be non-empty")
    if fold(a) == fold(b):
        return 1.0
    va, vb = char_trigrams(a), char_trigrams(b)
    if not va or not vb:
        return 0.0
    dot = sum(c * vb[g] for g, c in va.items())
    if dot == 0:
        return 0.0
    na = sqrt(sum(c * c for c in va.values()))
    nb = sqrt(sum(c * c for c in vb.values()))
    return dot / (na * nb)


class LexicalSimilarity:
    """Deterministic similarity backend built on character 3-grams."""

    name = "lexical"

    def similarities(self, query: str, texts: Sequence[str]) -> list[float]:
        return [lexical_similarity(query, t) for t in texts]


class RemoteSimilarity:
    """Similarity via the model server's /embed endpoint (cosine of vectors)."""

    name = "remote"

    def __init__(self, client):
        self.client = client

    def similarities(self, query: str, texts: Sequence[str]) -> list[float]:
        vectors = self.client.embed([query, *texts])
        q = np.asarray(vectors[0], dtype=np.float64)
        out = []
        for v in vectors[1:]:
            v = np.asarray(v, dtype=np.float64)
            denom = float(np.linalg.norm(q) * np.linalg.norm(v))
            out.append(float(np.dot(q, v) / denom) if denom else 0.0)
        return out
