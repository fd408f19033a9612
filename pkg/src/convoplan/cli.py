"""Command-line entry points: serving, the terminal REPL, training and the
three evaluation protocols."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from .service import ServiceConfig, TaskService, create_app, load_config, run_repl


def _common(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                      help="YAML config file; omitted fields use bundled defaults.")(fn)
    fn = click.option("--log-level", default="INFO", show_default=True)(fn)
    fn = click.option("--workspace", default=None, help="Artifact directory override.")(fn)
    return fn


def _setup(config_path, log_level, workspace) -> ServiceConfig:
    logging.basicConfig(level=getattr(logging, log_level.upper(), logging.INFO),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return load_config(config_path, workspace=workspace)


def _print_report(report: dict) -> None:
    click.echo(json.dumps(report, indent=2, sort_keys=True, default=str))


@click.group()
def main():
    """Conversational task identification and planning."""


@main.command()
@_common
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, log_level, workspace, host, port):
    """Run the HTTP service."""
    import uvicorn

    config = _setup(config_path, log_level, workspace)
    service = TaskService(config)
    app = create_app(service)
    uvicorn.run(app, host=host or config.host, port=port or config.port, log_level="warning")


@main.command()
@_common
def repl(config_path, log_level, workspace):
    """Interactive terminal dialogue."""
    config = _setup(config_path, log_level, workspace)
    run_repl(TaskService(config))


@main.command()
@_common
@click.option("--seed", type=int, default=0, show_default=True)
def train(config_path, log_level, workspace, seed):
    """Train the three sequence models on the bundled corpus."""
    from .crf import TrainHyper
    from .harness import load_corpus, train_all

    config = _setup(config_path, log_level, workspace)
    corpus = load_corpus(config.corpus)
    out_dir = Path(config.task_model).parent
    train_all(corpus, TrainHyper(seed=seed), out_dir=out_dir)
    click.echo(f"trained 3 models on {len(corpus)} instructions -> {out_dir}")


@main.command("eval-labeling")
@_common
def eval_labeling_cmd(config_path, log_level, workspace):
    """Span-level precision/recall/F1 on the held-out split."""
    from .harness import eval_labeling, load_corpus, split_corpus, train_all

    config = _setup(config_path, log_level, workspace)
    corpus = load_corpus(config.corpus)
    train_set, test_set = split_corpus(corpus)
    models = train_all(train_set)
    report = eval_labeling(models, test_set)
    for model_name, metrics in report.items():
        click.echo(
            f"{model_name:10} P={metrics['precision']:.3f} "
            f"R={metrics['recall']:.3f} F1={metrics['f1']:.3f}"
        )
    _print_report(report)


def _build_engine_and_world(config: ServiceConfig):
    from .dialogue import DialogueEngine, load_question_templates
    from .harness import load_corpus, stats_from_corpus, train_all
    from .planning import load_functional_positions, load_templates, load_world, parse_pddl
    from .service import _EMPTY_PROBLEM
    from .tasks import load_catalog

    corpus = load_corpus(config.corpus)
    models = train_all(corpus)
    catalog = load_catalog(config.catalog)
    engine = DialogueEngine(
        models["task"], models["argument"], models["argtype"], catalog,
        stats_from_corpus(corpus),
        load_question_templates(config.questions, catalog),
        confidence_threshold=config.confidence_threshold,
    )
    templates = load_templates(config.templates)
    world = load_world(config.world, load_functional_positions(config.functional))
    domain, _ = parse_pddl(Path(config.domain).read_text(), _EMPTY_PROBLEM)
    return corpus, engine, templates, world, domain


@main.command("eval-plans")
@_common
@click.option("--variant", type=click.Choice(["baseline", "dialogue-static",
                                              "dialogue-context", "complete", "all"]),
              default="all", show_default=True)
def eval_plans_cmd(config_path, log_level, workspace, variant):
    """Plan-generation rate with the simulated participant."""
    from .harness import VARIANTS, eval_plans

    config = _setup(config_path, log_level, workspace)
    corpus, engine, templates, world, domain = _build_engine_and_world(config)
    variants = VARIANTS if variant == "all" else (variant,)
    report = {}
    for name in variants:
        result = eval_plans(engine, corpus, world, domain, templates, name,
                            limits=config.solve_limits)
        click.echo(f"{name:17} planned {result.planned_tasks}/{result.total_tasks} "
                   f"rate={result.rate:.3f} questions={result.questions}")
        report[name] = {
            "planned": result.planned_tasks,
            "total": result.total_tasks,
            "rate": result.rate,
            "questions": result.questions,
            "per_instruction": result.per_instruction,
        }
    _print_report(report)


@main.command("eval-dialogue")
@_common
def eval_dialogue_cmd(config_path, log_level, workspace):
    """Question-count comparison of the two candidate-ranking strategies."""
    from .annotation import fallback_annotate
    from .dialogue import load_similarity_table
    from .harness import eval_dialogue_strategy, load_scenarios

    config = _setup(config_path, log_level, workspace)
    _, engine, _, _, _ = _build_engine_and_world(config)
    scenarios = load_scenarios(config.scenarios)
    similarity = load_similarity_table(config.similarity)
    report = eval_dialogue_strategy(engine, scenarios, similarity, fallback_annotate)
    for row in report["scenarios"]:
        click.echo(f"{row['kind']:9} {row['text']:42} "
                   f"count={row['count_questions']} baseline={row['baseline_questions']}")
    click.echo(f"totals: {report['totals']}")
    _print_report(report)


if __name__ == "__main__":
    main()
