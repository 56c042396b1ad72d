"""Inference backends behind the HTTP endpoints.

The dummy backend is fully deterministic and dependency-light; it keeps the
whole protocol exercisable without checkpoints.  The HF backend loads real
transformer checkpoints for any subset of the three roles and falls back to
the dummy implementation for the rest.
"""

from __future__ import annotations

import re
import zlib
from typing import Protocol, Sequence

import numpy as np

from .schemas import VerbalizeUnit

MAX_INPUT_LENGTH = 384
DOC_STRIDE = 128
UNSCORABLE = -1e9


class Backend(Protocol):
    def info(self) -> dict: ...

    def read_scores(
        self, question: str, passage: str, candidates: Sequence[tuple[int, int]]
    ) -> list[float]: ...

    def verbalize(self, units: Sequence[VerbalizeUnit]) -> list[str]: ...

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


def _last_segment(relation: str) -> str:
    return re.split(r"[./]", relation)[-1].replace("_", " ").strip().lower()


def template_sentences(units: Sequence[VerbalizeUnit]) -> list[str]:
    """Deterministic sentence per unit; used by the dummy backend and as a
    shape reference in tests."""
    out = []
    for unit in units:
        if not unit.triples:
            out.append("")
            continue
        if unit.pivot is not None:
            anchor = unit.triples[0]
            subject = anchor.head if anchor.head != unit.pivot else anchor.tail
            parts = [
                f"{_last_segment(t.relation)} {t.tail if t.head == unit.pivot else t.head}"
                for t in unit.triples[1:]
            ]
            out.append(f"{subject}: " + "; ".join(parts) + "." if parts else f"{subject}.")
            continue
        head = unit.triples[0].head
        relation = _last_segment(unit.triples[0].relation)
        tails = [t.tail for t in unit.triples]
        if len(tails) == 1:
            joined = tails[0]
        else:
            joined = ", ".join(tails[:-1]) + " and " + tails[-1]
        out.append(f"The {relation} of {head} is {joined}.")
    return out


def trigram_embed(texts: Sequence[str], dim: int = 128) -> list[list[float]]:
    """Hashed character-trigram vectors; stable across processes."""
    vectors = []
    for text in texts:
        folded = text.casefold()
        v = np.zeros(dim, dtype=np.float64)
        for i in range(max(0, len(folded) - 2)):
            bucket = zlib.crc32(folded[i : i + 3].encode("utf-8")) % dim
            v[bucket] += 1.0
        norm = np.linalg.norm(v)
        if norm > 0:
            v /= norm
        vectors.append(v.tolist())
    return vectors


class DummyBackend:
    """Deterministic stand-ins for all three models."""

    def info(self) -> dict:
        return {
            "backend": "dummy",
            "models": {
                "reader": "overlap-scorer",
                "generator": "template",
                "embedder": f"trigram-hash-{128}",
            },
        }

    def read_scores(self, question, passage, candidates):
        q_tokens = {t for t in re.findall(r"\w+", question.casefold())}
        scores = []
        for start, end in candidates:
            window = passage[max(0, start - 80) : min(len(passage), end + 80)]
            w_tokens = {t for t in re.findall(r"\w+", window.casefold())}
            span_tokens = {
                t for t in re.findall(r"\w+", passage[start:end].casefold())
            }
            scores.append(float(len(q_tokens & (w_tokens - span_tokens))))
        return scores

    def verbalize(self, units):
        return template_sentences(units)

    def embed(self, texts):
        return trigram_embed(texts)


class HFBackend:
    """Real checkpoints for any of reader/generator/embedder roles.

    Inference windows long passages with the standard 384/128 length and
    stride; a candidate span's score is its best start-logit + end-logit
    over all windows that contain it fully.
    """

    def __init__(
        self,
        qa_checkpoint: str | None = None,
        generator_checkpoint: str | None = None,
        embedder_checkpoint: str | None = None,
        device: str = "cpu",
    ):
        import torch
        from transformers import (
            AutoModelForQuestionAnswering,
            AutoTokenizer,
        )

        self._torch = torch
        self._device = device
        self._dummy = DummyBackend()
        self.qa_checkpoint = qa_checkpoint
        self.generator_checkpoint = generator_checkpoint
        self.embedder_checkpoint = embedder_checkpoint

        self.qa_tokenizer = None
        self.qa_model = None
        if qa_checkpoint:
            self.qa_tokenizer = AutoTokenizer.from_pretrained(qa_checkpoint)
            self.qa_model = AutoModelForQuestionAnswering.from_pretrained(qa_checkpoint)
            self.qa_model.to(device).eval()

        self.gen_tokenizer = None
        self.gen_model = None
        if generator_checkpoint:
            from transformers import AutoModelForSeq2SeqLM

            self.gen_tokenizer = AutoTokenizer.from_pretrained(generator_checkpoint)
            self.gen_model = AutoModelForSeq2SeqLM.from_pretrained(generator_checkpoint)
            self.gen_model.to(device).eval()

        self.embed_tokenizer = None
        self.embed_model = None
        if embedder_checkpoint:
            from transformers import AutoModel

            self.embed_tokenizer = AutoTokenizer.from_pretrained(embedder_checkpoint)
            self.embed_model = AutoModel.from_pretrained(embedder_checkpoint)
            self.embed_model.to(device).eval()

    def info(self) -> dict:
        return {
            "backend": "hf",
            "models": {
                "reader": self.qa_checkpoint or "dummy",
                "generator": self.generator_checkpoint or "dummy",
                "embedder": self.embedder_checkpoint or "dummy",
            },
        }

    def read_scores(self, question, passage, candidates):
        if self.qa_model is None:
            return self._dummy.read_scores(question, passage, candidates)
        torch = self._torch
        encoded = self.qa_tokenizer(
            question,
            passage,
            truncation="only_second",
            max_length=MAX_INPUT_LENGTH,
            stride=DOC_STRIDE,
            return_overflowing_tokens=True,
            return_offsets_mapping=True,
            padding="max_length",
            return_tensors="pt",
        )
        offset_mapping = encoded.pop("offset_mapping")
        encoded.pop("overflow_to_sample_mapping", None)
        with torch.no_grad():
            output = self.qa_model(
                **{k: v.to(self._device) for k, v in encoded.items()}
            )
        start_logits = output.start_logits.cpu().numpy()
        end_logits = output.end_logits.cpu().numpy()
        sequence_ids = [
            encoded.sequence_ids(i) for i in range(offset_mapping.shape[0])
        ]

        scores = [UNSCORABLE] * len(candidates)
        for w in range(offset_mapping.shape[0]):
            offsets = offset_mapping[w].tolist()
            # token index by passage character offset, passage tokens only
            char_to_start: dict[int, int] = {}
            char_to_end: dict[int, int] = {}
            for idx, (seq, (cs, ce)) in enumerate(zip(sequence_ids[w], offsets)):
                if seq != 1 or cs == ce:
                    continue
                char_to_start.setdefault(cs, idx)
                char_to_end[ce] = idx
            for ci, (start, end) in enumerate(candidates):
                ts = char_to_start.get(start)
                te = char_to_end.get(end)
                if ts is None or te is None:
                    continue
                score = float(start_logits[w][ts] + end_logits[w][te])
                if score > scores[ci]:
                    scores[ci] = score
        return scores

    def verbalize(self, units):
        if self.gen_model is None:
            return self._dummy.verbalize(units)
        torch = self._torch
        inputs = [_linearize(unit) for unit in units]
        encoded = self.gen_tokenizer(
            inputs, padding=True, truncation=True, max_length=256, return_tensors="pt"
        )
        with torch.no_grad():
            generated = self.gen_model.generate(
                **{k: v.to(self._device) for k, v in encoded.items()},
                max_new_tokens=96,
                num_beams=1,
                do_sample=False,
            )
        return self.gen_tokenizer.batch_decode(generated, skip_special_tokens=True)

    def embed(self, texts):
        if self.embed_model is None:
            return self._dummy.embed(texts)
        torch = self._torch
        encoded = self.embed_tokenizer(
            list(texts), padding=True, truncation=True, max_length=256, return_tensors="pt"
        )
        with torch.no_grad():
            output = self.embed_model(
                **{k: v.to(self._device) for k, v in encoded.items()}
            )
        hidden = output.last_hidden_state
        mask = encoded["attention_mask"].unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
        return [v.tolist() for v in pooled.cpu()]


def _linearize(unit: VerbalizeUnit) -> str:
    parts = []
    for t in unit.triples:
        parts.append(f"<H> {t.head} <R> {_last_segment(t.relation)} <T> {t.tail}")
    return " ".join(parts)
