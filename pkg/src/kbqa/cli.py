"""Command-line entry point: one subcommand per pipeline stage plus e2e.

Stages speak JSON Lines; each subcommand reads the previous stage's records
from a file or stdin, adds its own fields, and writes to stdout or --out,
so ``subgraph dump | verbalize | passage build | answer`` composes into the
same per-question results as ``e2e``.  Exit codes: 0 ok, 1 stage error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import IO, Iterator

from . import evaluation, kb as kb_mod, linking, passage, reader, subgraph, verbalize
from .client import ModelServerClient
from .errors import PipelineError
from .evaluation import PipelineConfig, Question
from .matching import LexicalSimilarity, RemoteSimilarity


def _open_in(path: str | None) -> IO[str]:
    if path in (None, "-"):
        return sys.stdin
    return open(path, "r", encoding="utf-8")


def _open_out(path: str | None) -> IO[str]:
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _read_records(stream: IO[str]) -> Iterator[dict]:
    for line in stream:
        line = line.strip()
        if line:
            yield json.loads(line)


def _emit(stream: IO[str], record: dict) -> None:
    stream.write(json.dumps(record, ensure_ascii=False) + "\n")


def _question_from_record(record: dict) -> Question:
    return evaluation._parse_question(record, record.get("_index", 0))


def _client_for(args) -> ModelServerClient | None:
    endpoint = getattr(args, "endpoint", None)
    return ModelServerClient(endpoint) if endpoint else None


# -- kb subcommands -----------------------------------------------------------


def _cmd_kb_load(args) -> int:
    filt = kb_mod.PreprocessFilter(
        deny_prefixes=tuple(args.deny or ()),
        allow_prefixes=tuple(args.allow or ()),
        name_relations=frozenset(args.name_relation or ()),
        alias_relations=frozenset(args.alias_relation or ()),
    )
    knowledge = kb_mod.load_ntriples(args.ntriples, filt, strict=args.strict)
    if args.cvt_relation or args.cvt_heuristic:
        policy = kb_mod.CvtPolicy(
            relations=frozenset(args.cvt_relation or ()),
            use_heuristic=args.cvt_heuristic,
        )
        knowledge = kb_mod.mark_cvt(knowledge, policy)
    kb_mod.save_snapshot(knowledge, args.out)
    print(kb_mod.stats_json(knowledge))
    return 0


def _cmd_kb_stats(args) -> int:
    print(kb_mod.stats_json(kb_mod.load_snapshot(args.kb)))
    return 0


def _cmd_kb_prune(args) -> int:
    knowledge = kb_mod.load_snapshot(args.kb)
    pruned = kb_mod.prune_to_relations(knowledge, args.keep)
    kb_mod.save_snapshot(pruned, args.out)
    print(kb_mod.stats_json(pruned))
    return 0


# -- stage subcommands ----------------------------------------------------------


def _cmd_link(args) -> int:
    knowledge = kb_mod.load_snapshot(args.kb) if args.kb else None
    links = linking.load_precomputed_links(args.links) if args.links else None
    out = _open_out(args.out)
    for index, record in enumerate(_read_records(_open_in(args.dataset))):
        record.setdefault("_index", index)
        question = _question_from_record(record)
        record.pop("_index", None)
        try:
            if args.mode == "golden":
                result = linking.link_golden(question)
            elif args.mode == "surface":
                if knowledge is None:
                    raise PipelineError("surface linking needs --kb")
                result = linking.link_surface(
                    question.text,
                    knowledge,
                    k=args.k,
                    threshold=args.link_threshold,
                    question_id=question.id,
                )
            else:
                if links is None or question.id not in links:
                    raise PipelineError(f"no precomputed links for {question.id}")
                result = links[question.id]
        except PipelineError as exc:
            record["error"] = str(exc)
            record["candidates"] = []
            record["topic_entities"] = []
            _emit(out, record)
            continue
        record["candidates"] = [c.to_json() for c in result.candidates]
        record["topic_entities"] = [{"id": e} for e in result.entity_ids()]
        _emit(out, record)
    return 0


def _cmd_subgraph_dump(args) -> int:
    knowledge = kb_mod.load_snapshot(args.kb)
    out = _open_out(args.out)
    for record in _read_records(_open_in(args.infile)):
        if record.get("error"):
            _emit(out, record)
            continue
        topics = [
            t["id"] if isinstance(t, dict) else t
            for t in record.get("topic_entities", [])
        ]
        topics = [t for t in topics if knowledge.knows(t)]
        try:
            if not topics:
                raise PipelineError("no known topic entity")
            sg = subgraph.extract(
                knowledge, topics, hops=args.hops, max_triples=args.max_triples
            )
        except PipelineError as exc:
            record["error"] = str(exc)
            _emit(out, record)
            continue
        record.update(sg.to_json())
        _emit(out, record)
    return 0


def _cmd_verbalize(args) -> int:
    knowledge = kb_mod.load_snapshot(args.kb)
    client = _client_for(args)
    out = _open_out(args.out)
    for record in _read_records(_open_in(args.infile)):
        if record.get("error"):
            _emit(out, record)
            continue
        sg = subgraph.Subgraph.from_json(record)
        try:
            units, dropped = verbalize.verbalize_units(
                sg,
                args.mode,
                knowledge.names,
                client=client,
                threshold=args.threshold,
            )
        except PipelineError as exc:
            record["error"] = str(exc)
            _emit(out, record)
            continue
        record["units"] = [u.to_json() for u in units]
        record["dropped_units"] = dropped
        _emit(out, record)
    return 0


def _cmd_passage_build(args) -> int:
    client = _client_for(args)
    backend = (
        RemoteSimilarity(client) if args.similarity == "remote" else LexicalSimilarity()
    )
    out = _open_out(args.out)
    for record in _read_records(_open_in(args.infile)):
        if record.get("error"):
            _emit(out, record)
            continue
        units = [verbalize.VerbalizedUnit.from_json(u) for u in record.get("units", [])]
        try:
            built = passage.build(
                str(record["id"]),
                record["question"],
                units,
                budget_words=args.budget_words,
                threshold=args.threshold,
                backend=backend,
            )
        except PipelineError as exc:
            record["error"] = str(exc)
            _emit(out, record)
            continue
        for key in ("topics", "triples", "events", "units", "hop_limit"):
            record.pop(key, None)
        record.update(built.to_json())
        _emit(out, record)
    return 0


def _cmd_answer(args) -> int:
    client = _client_for(args)
    out = _open_out(args.out)
    for record in _read_records(_open_in(args.infile)):
        if record.get("error"):
            _emit(
                out,
                {
                    "id": record.get("id"),
                    "top": None,
                    "ranked": [],
                    "error": record["error"],
                    "answers": record.get("answers", []),
                },
            )
            continue
        built = passage.Passage.from_json(record)
        question = Question(
            id=str(record["id"]),
            text=record["question"],
            language=record.get("language", "en"),
            topic_entities=(),
            answers=(evaluation.AnswerRef(name="?"),),
        )
        try:
            if args.reader == "remote":
                prediction = reader.read_remote(question, built, client)
            else:
                prediction = reader.read_lexical(question, built)
        except PipelineError as exc:
            _emit(out, {"id": question.id, "top": None, "ranked": [], "error": str(exc)})
            continue
        result = prediction.to_json()
        result["answers"] = record.get("answers", [])
        _emit(out, result)
    return 0


def _cmd_evaluate(args) -> int:
    gold = evaluation.load_dataset(args.dataset, format=args.format)
    names = kb_mod.load_snapshot(args.kb).names if args.kb else None
    by_id = {q.id: q for q in gold}
    rows = []
    correct_count = 0
    for record in _read_records(_open_in(args.infile)):
        qid = str(record.get("id"))
        question = by_id.get(qid)
        if question is None:
            raise PipelineError(f"prediction for unknown question {qid}")
        top_json = record.get("top")
        correct = False
        if top_json is not None:
            top = kb_mod.KbObject.from_json(top_json)
            correct = any(
                evaluation.answer_matches(top, a, names) for a in question.answers
            )
        rows.append({"id": qid, "top": top_json, "correct": correct})
        correct_count += int(correct)
    rows.sort(key=lambda r: r["id"])
    report = {
        "config": args.config_name,
        "hits_at_1": correct_count / len(gold) if gold else 0.0,
        "n": len(gold),
        "diagnostics": {"missing_predictions": len(gold) - len(rows)},
        "rows": rows,
    }
    _open_out(args.out).write(json.dumps(report, ensure_ascii=False) + "\n")
    return 0


def _cmd_e2e(args) -> int:
    cfg = PipelineConfig.from_file(args.config)
    overrides = {
        "budget_words": args.budget_words,
        "fuzzy_threshold": args.threshold,
        "hops": args.hops,
        "verbalizer_mode": args.verbalizer,
        "reader_mode": args.reader,
        "endpoint": args.endpoint,
        "workers": args.workers,
    }
    from dataclasses import replace

    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    questions = evaluation.load_dataset(args.dataset, format=args.format)
    knowledge = kb_mod.load_snapshot(args.kb)
    report = evaluation.run_config(cfg, questions, knowledge)
    _open_out(args.out).write(json.dumps(report.to_json(), ensure_ascii=False) + "\n")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kbqa",
        description="Answer questions over a knowledge base by reading verbalized passages.",
    )
    parser.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    kb_parser = sub.add_parser("kb", help="build, inspect, or prune a KB snapshot")
    kb_sub = kb_parser.add_subparsers(dest="kb_command", required=True)

    p = kb_sub.add_parser("load", help="parse an N-Triples dump into a snapshot")
    p.add_argument("--ntriples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--deny", action="append", metavar="PREFIX")
    p.add_argument("--allow", action="append", metavar="PREFIX")
    p.add_argument("--name-relation", action="append", metavar="RELATION")
    p.add_argument("--alias-relation", action="append", metavar="RELATION")
    p.add_argument("--cvt-relation", action="append", metavar="RELATION")
    p.add_argument("--cvt-heuristic", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_kb_load)

    p = kb_sub.add_parser("stats", help="print triple/entity/relation counts")
    p.add_argument("--kb", required=True)
    p.set_defaults(func=_cmd_kb_stats)

    p = kb_sub.add_parser("prune", help="keep only the listed relations")
    p.add_argument("--kb", required=True)
    p.add_argument("--keep", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_kb_prune)

    p = sub.add_parser("link", help="resolve topic entities per question")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kb")
    p.add_argument("--mode", choices=("golden", "surface", "precomputed"), default="golden")
    p.add_argument("--links", help="precomputed links JSONL")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--link-threshold", type=float, default=85.0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_link)

    sg_parser = sub.add_parser("subgraph", help="extract question subgraphs")
    sg_sub = sg_parser.add_subparsers(dest="subgraph_command", required=True)
    p = sg_sub.add_parser("dump", help="write each question's subgraph as JSON")
    p.add_argument("--kb", required=True)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--max-triples", type=int, default=2000)
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_subgraph_dump)

    p = sub.add_parser("verbalize", help="turn subgraphs into sentences")
    p.add_argument("--kb", required=True)
    p.add_argument("--mode", choices=verbalize.MODES, default="template")
    p.add_argument("--threshold", type=float, default=85.0)
    p.add_argument("--endpoint")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verbalize)

    passage_parser = sub.add_parser("passage", help="assemble passages")
    passage_sub = passage_parser.add_subparsers(dest="passage_command", required=True)
    p = passage_sub.add_parser("build", help="rank, trim, and ground sentences")
    p.add_argument("--budget-words", type=int, default=750)
    p.add_argument("--threshold", type=float, default=85.0)
    p.add_argument("--similarity", choices=("lexical", "remote"), default="lexical")
    p.add_argument("--endpoint")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_passage_build)

    p = sub.add_parser("answer", help="rank candidate spans into answers")
    p.add_argument("--reader", choices=("lexical", "remote"), default="lexical")
    p.add_argument("--endpoint")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_answer)

    p = sub.add_parser("evaluate", help="score answer records against gold")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=evaluation.DATASET_FORMATS, default="webqsp-zh")
    p.add_argument("--kb")
    p.add_argument("--config-name", default="cli")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("e2e", help="run the full pipeline and report hits@1")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=evaluation.DATASET_FORMATS, default="webqsp-zh")
    p.add_argument("--kb", required=True)
    p.add_argument("--budget-words", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--hops", type=int)
    p.add_argument("--verbalizer", choices=verbalize.MODES)
    p.add_argument("--reader", choices=("lexical", "remote"))
    p.add_argument("--endpoint")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_e2e)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
