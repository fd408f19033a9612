#!/usr/bin/env python
"""Train the three models and run every evaluation; prints one combined report.

Usage: python scripts/run_experiments.py [--out report.json]
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from convoplan.annotation import fallback_annotate  # noqa: E402
from convoplan.dialogue import (  # noqa: E402
    DialogueEngine,
    load_question_templates,
    load_similarity_table,
)
from convoplan.harness import (  # noqa: E402
    VARIANTS,
    eval_dialogue_strategy,
    eval_labeling,
    eval_plans,
    load_corpus,
    load_scenarios,
    split_corpus,
    stats_from_corpus,
    train_all,
)
from convoplan.planning import (  # noqa: E402
    load_functional_positions,
    load_templates,
    load_world,
    parse_pddl,
)
from convoplan.service import _EMPTY_PROBLEM, DATA_DIR  # noqa: E402
from convoplan.tasks import load_catalog  # noqa: E402


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=None, help="also write the report as JSON")
    args = parser.parse_args()

    corpus = load_corpus(DATA_DIR / "corpus.jsonl")
    train_set, test_set = split_corpus(corpus)

    print(f"training on {len(train_set)} instructions, evaluating on {len(test_set)}")
    split_models = train_all(train_set)
    labeling = eval_labeling(split_models, test_set)
    for name, metrics in labeling.items():
        print(f"  {name:10} P={metrics['precision']:.3f} R={metrics['recall']:.3f} "
              f"F1={metrics['f1']:.3f}")

    print("training full-corpus models for the system-level experiments")
    models = train_all(corpus, out_dir="workspace/models")
    catalog = load_catalog(DATA_DIR / "catalog.txt")
    engine = DialogueEngine(
        models["task"], models["argument"], models["argtype"], catalog,
        stats_from_corpus(corpus),
        load_question_templates(DATA_DIR / "questions.txt", catalog),
    )
    templates = load_templates(DATA_DIR / "state_templates.txt")
    world = load_world(DATA_DIR / "world.json",
                       load_functional_positions(DATA_DIR / "functional.tsv"))
    domain, _ = parse_pddl((DATA_DIR / "domain.pddl").read_text(), _EMPTY_PROBLEM)

    plans = {}
    for variant in VARIANTS:
        result = eval_plans(engine, corpus, world, domain, templates, variant)
        plans[variant] = {"planned": result.planned_tasks, "total": result.total_tasks,
                          "rate": result.rate, "questions": result.questions}
        print(f"  {variant:17} planned {result.planned_tasks}/{result.total_tasks} "
              f"rate={result.rate:.3f}")

    scenarios = load_scenarios(DATA_DIR / "scenarios.jsonl")
    similarity = load_similarity_table(DATA_DIR / "similarity.tsv")
    dialogue = eval_dialogue_strategy(engine, scenarios, similarity, fallback_annotate)
    print(f"  question totals: {dialogue['totals']}")

    report = {"labeling": labeling, "plans": plans, "dialogue": dialogue}
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True, default=str))
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
