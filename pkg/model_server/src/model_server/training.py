"""Staged finetuning for the extractive reader.

The schedule runs up to three stages in order — a large English MRC
corpus, cross-lingual MRC data, then instances converted from exported
passages — on one model, and writes a checkpoint whose manifest records
exactly which stages went in (that tag is how evaluation reports name
their ablation row).
"""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .backends import DOC_STRIDE, MAX_INPUT_LENGTH

STAGE_ORDER = ("squad", "xmrc", "xkbqa")
GOLD_SPAN_RULE = "first occurrence by start offset"


class TrainingDataMissingError(Exception):
    """No usable training examples for the requested schedule."""


@dataclass
class QaExample:
    id: str
    question: str
    context: str
    answer_text: str
    answer_start: int


@dataclass
class TrainSettings:
    batch_size: int = 12
    learning_rate: float = 3e-5
    epochs: int = 2
    max_input_length: int = MAX_INPUT_LENGTH
    doc_stride: int = DOC_STRIDE
    max_steps_per_stage: int | None = None
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "max_input_length": self.max_input_length,
            "doc_stride": self.doc_stride,
            "max_steps_per_stage": self.max_steps_per_stage,
            "seed": self.seed,
        }


def load_squad_file(path: str) -> list[QaExample]:
    """Read the standard nested reading-comprehension JSON layout."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    examples = []
    for article in payload.get("data", []):
        for paragraph in article.get("paragraphs", []):
            context = paragraph["context"]
            for qa in paragraph.get("qas", []):
                answers = qa.get("answers") or []
                if not answers:
                    continue
                first = answers[0]
                examples.append(
                    QaExample(
                        id=str(qa["id"]),
                        question=qa["question"],
                        context=context,
                        answer_text=first["text"],
                        answer_start=int(first["answer_start"]),
                    )
                )
    return examples


def _normalize(text: str) -> str:
    return "".join(
        ch
        for ch in text.casefold()
        if not unicodedata.category(ch).startswith("P") and not ch.isspace()
    )


def convert_passages(path: str) -> tuple[list[QaExample], int]:
    """Turn exported passage records into span-supervised examples.

    A record supplies the question, the passage text, the grounded span
    table, and the gold answers.  Among spans matching any gold answer
    (by KB id when both carry one, else by normalized surface), the one
    with the smallest start offset becomes the training span; records
    whose passage contains no gold span are skipped and counted.
    """
    examples: list[QaExample] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("error") or "text" not in record:
                skipped += 1
                continue
            answers = record.get("answers") or []
            gold = None
            for span in sorted(record.get("spans", []), key=lambda s: s["start"]):
                obj = span.get("object", {})
                for answer in answers:
                    if answer.get("id") and obj.get("kind") == "entity":
                        if obj.get("id") == answer["id"]:
                            gold = span
                            break
                    else:
                        surface = (
                            obj.get("text")
                            if obj.get("kind") == "literal"
                            else span.get("surface", "")
                        )
                        if _normalize(surface or "") == _normalize(answer.get("name", "")):
                            gold = span
                            break
                if gold:
                    break
            if gold is None:
                skipped += 1
                continue
            examples.append(
                QaExample(
                    id=str(record.get("question_id") or record.get("id")),
                    question=record["question"],
                    context=record["text"],
                    answer_text=record["text"][gold["start"] : gold["end"]],
                    answer_start=gold["start"],
                )
            )
    return examples, skipped


def _encode(examples: list[QaExample], tokenizer, settings: TrainSettings):
    import torch

    encoded = tokenizer(
        [e.question for e in examples],
        [e.context for e in examples],
        truncation="only_second",
        max_length=settings.max_input_length,
        stride=settings.doc_stride,
        return_overflowing_tokens=True,
        return_offsets_mapping=True,
        padding="max_length",
        return_tensors="pt",
    )
    sample_map = encoded.pop("overflow_to_sample_mapping").tolist()
    offset_mapping = encoded.pop("offset_mapping").tolist()

    start_positions = []
    end_positions = []
    for i, offsets in enumerate(offset_mapping):
        example = examples[sample_map[i]]
        answer_start = example.answer_start
        answer_end = answer_start + len(example.answer_text)
        sequence_ids = encoded.sequence_ids(i)
        ts = te = 0  # CLS fallback when the window misses the answer
        for idx, (seq, (cs, ce)) in enumerate(zip(sequence_ids, offsets)):
            if seq != 1 or cs == ce:
                continue
            if cs <= answer_start < ce and ts == 0:
                ts = idx
            if cs < answer_end <= ce:
                te = idx
        if ts == 0 or te == 0:
            ts = te = 0
        start_positions.append(ts)
        end_positions.append(te)

    encoded["start_positions"] = torch.tensor(start_positions)
    encoded["end_positions"] = torch.tensor(end_positions)
    return encoded


def _train_stage(model, tokenizer, examples, settings: TrainSettings) -> int:
    import torch

    encoded = _encode(examples, tokenizer, settings)
    n = encoded["input_ids"].shape[0]
    optimizer = torch.optim.AdamW(model.parameters(), lr=settings.learning_rate)
    model.train()
    steps = 0
    for _epoch in range(settings.epochs):
        for lo in range(0, n, settings.batch_size):
            hi = min(lo + settings.batch_size, n)
            batch = {k: v[lo:hi] for k, v in encoded.items()}
            output = model(**batch)
            output.loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            steps += 1
            if (
                settings.max_steps_per_stage is not None
                and steps >= settings.max_steps_per_stage
            ):
                return steps
    return steps


def train_reader(
    datasets: dict[str, list[str]],
    out_dir: str,
    base_model: str | None = None,
    fraction: float = 1.0,
    skip_squad: bool = False,
    skip_xmrc: bool = False,
    settings: TrainSettings | None = None,
) -> str:
    """Run the staged schedule and write checkpoint + manifest.

    `datasets` maps stage names (squad, xmrc, xkbqa) to file paths:
    reading-comprehension JSON for the first two, exported passage JSON
    Lines for the last.  `fraction` subsamples the xkbqa stage (the
    scarce, expensive annotations); skip flags drop whole stages.
    Returns the checkpoint directory, which `serve` can load directly.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    settings = settings or TrainSettings()

    import torch
    from transformers import AutoModelForQuestionAnswering, AutoTokenizer

    from .tiny import build_tiny_qa_checkpoint

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if base_model is None:
        base_model = build_tiny_qa_checkpoint(str(out / "base"), seed=settings.seed)

    plan: list[tuple[str, list[str]]] = []
    for name in STAGE_ORDER:
        if name == "squad" and skip_squad:
            continue
        if name == "xmrc" and skip_xmrc:
            continue
        paths = datasets.get(name) or []
        if paths:
            plan.append((name, paths))
    if not plan:
        raise TrainingDataMissingError("every stage was skipped or has no data")

    torch.manual_seed(settings.seed)
    tokenizer = AutoTokenizer.from_pretrained(base_model)
    model = AutoModelForQuestionAnswering.from_pretrained(base_model)

    manifest_stages = []
    for name, paths in plan:
        examples: list[QaExample] = []
        skipped = 0
        for path in paths:
            if name == "xkbqa":
                converted, n_skipped = convert_passages(path)
                examples.extend(converted)
                skipped += n_skipped
            else:
                examples.extend(load_squad_file(path))
        if name == "xkbqa" and fraction < 1.0:
            keep = max(1, math.ceil(fraction * len(examples)))
            examples = sorted(examples, key=lambda e: e.id)[:keep]
        if not examples:
            raise TrainingDataMissingError(f"stage {name!r} has no usable examples")
        steps = _train_stage(model, tokenizer, examples, settings)
        manifest_stages.append(
            {
                "name": name,
                "paths": list(paths),
                "examples": len(examples),
                "skipped_records": skipped,
                "steps": steps,
            }
        )

    model.save_pretrained(str(out))
    tokenizer.save_pretrained(str(out))
    manifest = {
        "base_model": base_model,
        "stages": manifest_stages,
        "stage_names": [s["name"] for s in manifest_stages],
        "fraction": fraction,
        "gold_span_rule": GOLD_SPAN_RULE,
        "hyperparameters": settings.to_json(),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    return str(out)
