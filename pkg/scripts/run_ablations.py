#!/usr/bin/env python3
"""Run every named ablation configuration over a dataset and print one
comparable report row per configuration.

Example (toy fixture):
    python scripts/run_ablations.py \
        --kb tests/data/toy_kb.nt \
        --dataset tests/data/toy_questions.jsonl
"""

from __future__ import annotations

import argparse
import json

from kbqa import kb as kbm
from kbqa.evaluation import PipelineConfig, load_dataset, run_ablations

TOY_FILTER = kbm.PreprocessFilter(
    deny_prefixes=("common.topic.page_id", "wiki."),
    name_relations=frozenset({"type.object.name"}),
    alias_relations=frozenset({"common.topic.alias"}),
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kb", required=True, help="N-Triples file or .snap snapshot")
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--format", default="webqsp-zh")
    parser.add_argument("--hops", type=int, default=2)
    parser.add_argument("--budget-words", type=int, default=750)
    parser.add_argument("--out", help="write full reports as JSON lines")
    args = parser.parse_args()

    if args.kb.endswith(".snap"):
        knowledge = kbm.load_snapshot(args.kb)
    else:
        knowledge = kbm.load_ntriples(args.kb, TOY_FILTER)
        knowledge = kbm.mark_cvt(knowledge, kbm.CvtPolicy.heuristic())

    questions = load_dataset(args.dataset, format=args.format)
    base = PipelineConfig(hops=args.hops, budget_words=args.budget_words)
    reports = run_ablations(base, questions, knowledge)

    width = max(len(r.config.name) for r in reports)
    print(f"{'configuration':<{width}}  hits@1   n    failures")
    for report in reports:
        failed = sum(1 for r in report.rows if not r["correct"])
        print(
            f"{report.config.name:<{width}}  {report.hits:.4f}  {len(report.rows):<4d} {failed}"
        )

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for report in reports:
                fh.write(json.dumps(report.to_json(), ensure_ascii=False) + "\n")
        print(f"\nfull reports written to {args.out}")


if __name__ == "__main__":
    main()
