#!/usr/bin/env python3
"""Compare surface-form entity linking against the golden annotations and
report recall@k over a dataset.

Example (toy fixture):
    python scripts/link_recall_study.py \
        --kb tests/data/toy_kb.nt \
        --dataset tests/data/toy_questions.jsonl --k 5
"""

from __future__ import annotations

import argparse

from kbqa import kb as kbm
from kbqa.evaluation import load_dataset
from kbqa.linking import link_surface, recall_at_k

TOY_FILTER = kbm.PreprocessFilter(
    deny_prefixes=("common.topic.page_id", "wiki."),
    name_relations=frozenset({"type.object.name"}),
    alias_relations=frozenset({"common.topic.alias"}),
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kb", required=True)
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--threshold", type=float, default=85.0)
    args = parser.parse_args()

    if args.kb.endswith(".snap"):
        knowledge = kbm.load_snapshot(args.kb)
    else:
        knowledge = kbm.load_ntriples(args.kb, TOY_FILTER)

    questions = [q for q in load_dataset(args.dataset) if q.topic_entities]
    results = [
        link_surface(
            q.text, knowledge, k=args.k, threshold=args.threshold, question_id=q.id
        )
        for q in questions
    ]
    gold = {q.id: set(q.topic_entities) for q in questions}
    for k in range(1, args.k + 1):
        print(f"recall@{k}: {recall_at_k(results, gold, k):.4f}")
    # external reference points for full-scale linking, shown for context
    # only: surface matching over translated questions vs. a neural
    # cross-lingual linker, both measured at k=5
    print("reference recall@5: surface-matching 0.891, neural linker 0.768")
    misses = [
        r.question_id
        for r in results
        if not any(e in gold[r.question_id] for e in r.entity_ids()[: args.k])
    ]
    if misses:
        print(f"missed at k={args.k}: {', '.join(misses)}")


if __name__ == "__main__":
    main()
