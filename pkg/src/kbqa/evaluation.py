"""Dataset loading, answer matching, hits@1, and named pipeline runs.

A run executes link -> extract -> verbalize -> build -> read per question;
per-question failures are counted in the report diagnostics and scored as
incorrect, so hits@1 always averages over the full question list.
"""

from __future__ import annotations

import json
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Mapping, Sequence

from . import linking, passage, reader, subgraph, verbalize
from .client import ModelServerClient
from .errors import (
    ConfigError,
    IdMismatchError,
    MissingGoldError,
    NoCandidatesError,
    PipelineError,
    RemoteUnavailableError,
    SchemaError,
)
from .kb import KbObject, KnowledgeBase
from .matching import LexicalSimilarity, RemoteSimilarity
from .reader import Prediction

QALD_M_LANGUAGES = frozenset(
    {"fa", "de", "ro", "it", "ru", "fr", "nl", "es", "hi", "hi_in", "pt", "pt_br"}
)

DATASET_FORMATS = ("webqsp-zh", "qald-m")


@dataclass(frozen=True)
class AnswerRef:
    """One gold answer: an optional KB id plus its surface form."""

    name: str
    id: str | None = None


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    language: str
    topic_entities: tuple[str, ...]
    answers: tuple[AnswerRef, ...]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "question": self.text,
            "language": self.language,
            "topic_entities": [{"id": e} for e in self.topic_entities],
            "answers": [
                {"name": a.name, **({"id": a.id} if a.id else {})}
                for a in self.answers
            ],
        }


def _parse_question(record: dict, index: int) -> Question:
    if not isinstance(record, dict):
        raise SchemaError(index, "record is not a JSON object")
    for key in ("id", "question", "language"):
        if key not in record:
            raise SchemaError(index, f"missing field {key!r}")
    text = record["question"]
    if not isinstance(text, str) or not text.strip():
        raise SchemaError(index, "empty question text")
    answers_raw = record.get("answers")
    if not isinstance(answers_raw, list) or not answers_raw:
        raise SchemaError(index, "missing or empty 'answers'")
    answers = []
    for a in answers_raw:
        if isinstance(a, str):
            answers.append(AnswerRef(name=a))
        elif isinstance(a, dict) and a.get("name"):
            answers.append(AnswerRef(name=str(a["name"]), id=a.get("id")))
        else:
            raise SchemaError(index, f"bad answer record {a!r}")
    topics_raw = record.get("topic_entities", [])
    if not isinstance(topics_raw, list):
        raise SchemaError(index, "'topic_entities' is not a list")
    topics = []
    for t in topics_raw:
        if isinstance(t, str):
            topics.append(t)
        elif isinstance(t, dict) and t.get("id"):
            topics.append(str(t["id"]))
        else:
            raise SchemaError(index, f"bad topic entity record {t!r}")
    return Question(
        id=str(record["id"]),
        text=text,
        language=str(record["language"]),
        topic_entities=tuple(topics),
        answers=tuple(answers),
    )


def load_dataset(path: str, format: str = "webqsp-zh") -> list[Question]:
    """Read a JSON Lines question file, validating per-record schema."""
    if format not in DATASET_FORMATS:
        raise ConfigError(f"unknown dataset format {format!r}")
    questions: list[Question] = []
    with open(path, "r", encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(index, f"invalid JSON: {exc}") from exc
            q = _parse_question(record, index)
            if format == "qald-m":
                code = q.language.lower().replace("-", "_")
                if code not in QALD_M_LANGUAGES:
                    raise SchemaError(index, f"unexpected language {q.language!r}")
            questions.append(q)
    return questions


# -- answer matching ---------------------------------------------------------


def normalize_surface(text: str) -> str:
    """Case-fold and drop punctuation and whitespace; idempotent.

    Dropping separators entirely makes "Retail-Store", "Retail Store" and
    "retailstore" compare equal without any tokenizer assumptions.
    """
    return "".join(
        ch
        for ch in text.casefold()
        if not unicodedata.category(ch).startswith("P") and not ch.isspace()
    )


def object_surface(obj: KbObject, names: Mapping[str, str] | None = None) -> str:
    if obj.is_literal:
        return obj.value
    if names and obj.value in names:
        return names[obj.value]
    return obj.value


def answer_matches(
    obj: KbObject, gold: AnswerRef, names: Mapping[str, str] | None = None
) -> bool:
    """KB-id equality when both sides carry ids, else normalized surfaces."""
    if gold.id and not obj.is_literal:
        return obj.value == gold.id
    return normalize_surface(object_surface(obj, names)) == normalize_surface(gold.name)


def hits_at_1(
    predictions: Sequence[Prediction],
    gold: Sequence[Question],
    names: Mapping[str, str] | None = None,
) -> float:
    """Fraction of gold questions whose top prediction matches a gold answer.

    Questions without a prediction count as incorrect; a prediction without
    a gold question (or a duplicated id) is an alignment bug and raises.
    """
    by_id: dict[str, Question] = {q.id: q for q in gold}
    if not by_id:
        return 0.0
    seen: set[str] = set()
    correct = 0
    for pred in predictions:
        if pred.question_id not in by_id:
            raise IdMismatchError(f"prediction for unknown question {pred.question_id}")
        if pred.question_id in seen:
            raise IdMismatchError(f"duplicate prediction for question {pred.question_id}")
        seen.add(pred.question_id)
        question = by_id[pred.question_id]
        if any(answer_matches(pred.top, a, names) for a in question.answers):
            correct += 1
    return correct / len(by_id)


# -- pipeline configuration ---------------------------------------------------

_CONFIG_KEYS = {
    "name": ("name", str),
    "verbalizer.mode": ("verbalizer_mode", str),
    "reader.mode": ("reader_mode", str),
    "linker.mode": ("linker_mode", str),
    "linker.k": ("link_k", int),
    "linker.threshold": ("link_threshold", float),
    "linker.links_path": ("links_path", str),
    "passage.budget_words": ("budget_words", int),
    "fuzzy.threshold": ("fuzzy_threshold", float),
    "similarity.backend": ("similarity", str),
    "subgraph.hops": ("hops", int),
    "subgraph.max_triples": ("max_triples", int),
    "endpoints.model_server": ("endpoint", str),
    "training.fraction": ("training_fraction", float),
    "training.stages": ("training_stages", lambda v: tuple(s.strip() for s in v.split(","))),
    "workers": ("workers", int),
}


@dataclass(frozen=True)
class PipelineConfig:
    name: str = "default"
    verbalizer_mode: str = "template"
    reader_mode: str = "lexical"
    linker_mode: str = "golden"
    link_k: int = 5
    link_threshold: float = 85.0
    links_path: str | None = None
    budget_words: int = 750
    fuzzy_threshold: float = 85.0
    similarity: str = "lexical"
    hops: int = 2
    max_triples: int = 2000
    endpoint: str | None = None
    # training metadata only: recorded in reports, consumed by the trainer
    training_fraction: float = 1.0
    training_stages: tuple[str, ...] = ("squad", "xmrc", "xkbqa")
    workers: int = 1

    def validate(self) -> None:
        if self.verbalizer_mode not in verbalize.MODES:
            raise ConfigError(f"unknown verbalizer mode {self.verbalizer_mode!r}")
        if self.reader_mode not in ("lexical", "remote"):
            raise ConfigError(f"unknown reader mode {self.reader_mode!r}")
        if self.linker_mode not in ("golden", "surface", "precomputed"):
            raise ConfigError(f"unknown linker mode {self.linker_mode!r}")
        if self.similarity not in ("lexical", "remote"):
            raise ConfigError(f"unknown similarity backend {self.similarity!r}")
        if self.linker_mode == "precomputed" and not self.links_path:
            raise ConfigError("precomputed linking needs linker.links_path")
        if self.needs_remote() and not self.endpoint:
            raise ConfigError("remote mode configured without endpoints.model_server")
        if self.budget_words < 1 or self.hops < 1 or self.max_triples < 1:
            raise ConfigError("budget_words, hops, and max_triples must be positive")

    def needs_remote(self) -> bool:
        return "remote" in (self.verbalizer_mode, self.reader_mode, self.similarity)

    @staticmethod
    def from_file(path: str) -> "PipelineConfig":
        """Parse the flat ``key = value`` config format."""
        values: dict = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in _CONFIG_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                field_name, cast = _CONFIG_KEYS[key]
                try:
                    values[field_name] = cast(value)
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
        return PipelineConfig(**values)

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# -- report -------------------------------------------------------------------


@dataclass
class EvalReport:
    config: PipelineConfig
    rows: list[dict]
    hits: float
    diagnostics: dict

    def to_json(self) -> dict:
        return {
            "config": self.config.name,
            "hits_at_1": self.hits,
            "n": len(self.rows),
            "diagnostics": dict(self.diagnostics),
            "rows": list(self.rows),
            "settings": {
                k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self.config.to_json().items()
            },
        }


_DIAG_KEYS = (
    "no_candidates",
    "missing_gold",
    "remote_unavailable",
    "answer_not_in_passage",
    "other_failures",
    "dropped_units",
    "dropped_spans",
)


def _similarity_backend(cfg: PipelineConfig, client: ModelServerClient | None):
    if cfg.similarity == "remote":
        return RemoteSimilarity(client)
    return LexicalSimilarity()


def answer_question(
    cfg: PipelineConfig,
    question: Question,
    kb: KnowledgeBase,
    client: ModelServerClient | None = None,
    links: Mapping[str, linking.LinkResult] | None = None,
) -> tuple[Prediction, passage.Passage, int]:
    """Run the full pipeline for one question.

    Returns the prediction, the built passage, and the count of units the
    verbalizer dropped for lack of a surface form.
    """
    if cfg.linker_mode == "golden":
        topics = linking.link_golden(question).entity_ids()
    elif cfg.linker_mode == "surface":
        topics = linking.link_surface(
            question.text, kb, k=cfg.link_k, threshold=cfg.link_threshold,
            question_id=question.id,
        ).entity_ids()
    else:
        result = (links or {}).get(question.id)
        if result is None:
            raise MissingGoldError(f"no precomputed links for question {question.id}")
        topics = result.entity_ids()[: cfg.link_k]
    topics = [t for t in topics if kb.knows(t)]
    if not topics:
        raise NoCandidatesError(f"question {question.id}: no linkable topic entity")

    sg = subgraph.extract(kb, topics, hops=cfg.hops, max_triples=cfg.max_triples)
    units, dropped_units = verbalize.verbalize_units(
        sg, cfg.verbalizer_mode, kb.names, client=client, threshold=cfg.fuzzy_threshold
    )
    if not units:
        raise NoCandidatesError(f"question {question.id}: nothing verbalizable")
    built = passage.build(
        question.id,
        question.text,
        units,
        budget_words=cfg.budget_words,
        threshold=cfg.fuzzy_threshold,
        backend=_similarity_backend(cfg, client),
    )
    if cfg.reader_mode == "remote":
        prediction = reader.read_remote(question, built, client)
    else:
        prediction = reader.read_lexical(question, built)
    return prediction, built, dropped_units


def run_config(
    cfg: PipelineConfig,
    questions: Sequence[Question],
    kb: KnowledgeBase,
    client: ModelServerClient | None = None,
) -> EvalReport:
    """Evaluate one named configuration over a question list."""
    cfg.validate()
    if not questions:
        raise ConfigError("empty question list")
    ids = [q.id for q in questions]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate question ids in dataset")

    if cfg.needs_remote():
        if client is None:
            client = ModelServerClient(cfg.endpoint)
        client.health()  # RemoteUnavailable here aborts the whole run

    links = (
        linking.load_precomputed_links(cfg.links_path)
        if cfg.linker_mode == "precomputed"
        else None
    )
    diagnostics = {key: 0 for key in _DIAG_KEYS}

    def evaluate_one(question: Question) -> tuple[dict, dict]:
        local = {key: 0 for key in _DIAG_KEYS}
        row: dict = {"id": question.id, "top": None, "correct": False}
        try:
            prediction, built, dropped_units = answer_question(
                cfg, question, kb, client=client, links=links
            )
        except MissingGoldError:
            local["missing_gold"] += 1
            return row, local
        except NoCandidatesError:
            local["no_candidates"] += 1
            return row, local
        except RemoteUnavailableError:
            local["remote_unavailable"] += 1
            return row, local
        except PipelineError:
            local["other_failures"] += 1
            return row, local
        local["dropped_units"] += dropped_units
        local["dropped_spans"] += built.dropped_objects
        reachable = any(
            answer_matches(span.object, answer, kb.names)
            for span in built.spans
            for answer in question.answers
        )
        if not reachable:
            local["answer_not_in_passage"] += 1
        row["top"] = prediction.top.to_json()
        row["correct"] = any(
            answer_matches(prediction.top, a, kb.names) for a in question.answers
        )
        return row, local

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(evaluate_one, questions))
    else:
        outcomes = [evaluate_one(q) for q in questions]

    rows = []
    for row, local in outcomes:
        rows.append(row)
        for key, value in local.items():
            diagnostics[key] += value
    rows.sort(key=lambda r: r["id"])
    hits = sum(1 for r in rows if r["correct"]) / len(rows)
    return EvalReport(config=cfg, rows=rows, hits=hits, diagnostics=diagnostics)


# -- ablation suite -----------------------------------------------------------

ABLATION_NAMES = (
    "full",
    "w/o KB to text",
    "w/o xMRC data",
    "w/o SQuAD",
    "w/o xMRC data, SQuAD",
)


def ablation_configs(base: PipelineConfig) -> list[PipelineConfig]:
    """One comparable configuration per standard ablation row.

    Dropping generation swaps the verbalizer for plain concatenation; the
    training-stage ablations only change the recorded stage metadata here
    (they select differently finetuned checkpoints when a remote reader is
    configured).
    """
    return [
        replace(base, name="full"),
        replace(base, name="w/o KB to text", verbalizer_mode="concat"),
        replace(base, name="w/o xMRC data", training_stages=("squad", "xkbqa")),
        replace(base, name="w/o SQuAD", training_stages=("xmrc", "xkbqa")),
        replace(
            base, name="w/o xMRC data, SQuAD", training_stages=("xkbqa",)
        ),
    ]


def run_ablations(
    base: PipelineConfig,
    questions: Sequence[Question],
    kb: KnowledgeBase,
    client: ModelServerClient | None = None,
) -> list[EvalReport]:
    return [
        run_config(cfg, questions, kb, client=client)
        for cfg in ablation_configs(base)
    ]
