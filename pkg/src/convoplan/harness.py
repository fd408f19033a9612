"""Training and evaluation tooling: corpus loading, model training for the
three labeling stages, span metrics, plan-generation rates with a simulated
participant, and the question-count comparison of the two ranking strategies."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .annotation import AnnotatedSentence, ingest_annotated, resolve_pronouns
from .crf import CrfModel, FeatureConfig, TrainHyper, TrainingExample, save_model, train
from .dialogue import (
    ArgTypeProfile,
    DialogueEngine,
    DialogueSession,
    DialogueState,
    RankedCandidates,
    TaskStats,
    build_stats,
    rank_by_similarity,
)
from .planning import (
    Fluent,
    InconsistentGoalError,
    MissingBindingError,
    PlanningDomain,
    PlanningError,
    PlanningProblem,
    SolveLimits,
    SolveStatus,
    StateTemplate,
    WorldModel,
    chain_compound,
    contradicts,
    ground_template,
    register_objects,
    solve,
)
from .tasks import Span, TaskInstance, TaskTypeCatalog, spans_from_tags, task_channel_values

VARIANTS = ("baseline", "dialogue-static", "dialogue-context", "complete")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class GoldFrame:
    task: str
    trigger: Span
    args: dict[str, Span]
    missing: dict[str, str]  # argument values absent from the text


@dataclass(frozen=True)
class CorpusExample:
    sentence: AnnotatedSentence
    task_tags: tuple[str, ...]
    arg_tags: tuple[str, ...]
    frames: tuple[GoldFrame, ...]


def load_corpus(path: str | Path) -> list[CorpusExample]:
    examples = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            sentence = ingest_annotated(rec)
            task_tags = tuple(rec["task_tags"])
            arg_tags = tuple(rec["arg_tags"])
            if len(task_tags) != len(sentence) or len(arg_tags) != len(sentence):
                raise CorpusError("tag layer length mismatch")
            frames = []
            for fr in rec.get("frames", ()):
                s, e = fr["trigger"]
                frames.append(
                    GoldFrame(
                        task=fr["task"],
                        trigger=Span(s, e, " ".join(sentence.words[s:e])),
                        args={
                            a: Span(s2, e2, " ".join(sentence.words[s2:e2]))
                            for a, (s2, e2) in fr.get("args", {}).items()
                        },
                        missing=dict(fr.get("missing", {})),
                    )
                )
            examples.append(CorpusExample(sentence, task_tags, arg_tags, tuple(frames)))
        except (KeyError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    if not examples:
        raise CorpusError(f"{path}: empty corpus")
    return examples


def ingest_huric(path: str | Path) -> list[CorpusExample]:
    """Adapter stub for the HuRIC XML release.

    Field mapping (unimplemented): `<sentence>` → source text; `<token
    id/surface/lemma/pos>` → Token rows; `<semantics><frame name>` → task type;
    `<frameElement type>` token ranges → argument spans; dependency arcs from
    the `<dependencies>` block.
    """
    raise NotImplementedError("HuRIC ingestion is a documented stub; see docstring")


def ingest_veil(path: str | Path) -> list[CorpusExample]:
    """Adapter stub for the VEIL annotated-recipe corpus.

    Field mapping (unimplemented): `clauses[].text` → source text;
    `clauses[].verb` → trigger span; `clauses[].objects/preps` → argument
    spans keyed by role; no dependency layer, so `fallback_annotate` would
    supply one.
    """
    raise NotImplementedError("VEIL ingestion is a documented stub; see docstring")


def split_corpus(
    examples: list[CorpusExample], train_fraction: float = 0.8, seed: int = 13
) -> tuple[list[CorpusExample], list[CorpusExample]]:
    order = list(range(len(examples)))
    random.Random(seed).shuffle(order)
    cut = int(round(train_fraction * len(examples)))
    return [examples[i] for i in order[:cut]], [examples[i] for i in order[cut:]]


def _alphabet(tag_layers: list[tuple[str, ...]]) -> tuple[str, ...]:
    labels = sorted({t for tags in tag_layers for t in tags} - {"O"})
    return ("O",) + tuple(labels)


def train_all(
    corpus: list[CorpusExample],
    hyper: TrainHyper = TrainHyper(),
    out_dir: str | Path | None = None,
) -> dict[str, CrfModel]:
    """Train the task-type, argument-extractor and task-free argument models."""
    task_examples = [TrainingExample(ex.sentence, ex.task_tags) for ex in corpus]
    arg_examples = [
        TrainingExample(
            ex.sentence, ex.arg_tags, aux={"task": task_channel_values(ex.task_tags)}
        )
        for ex in corpus
    ]
    argtype_examples = [TrainingExample(ex.sentence, ex.arg_tags) for ex in corpus]

    base = FeatureConfig(window=2)
    models = {
        "task": train(task_examples, _alphabet([ex.task_tags for ex in corpus]), base, hyper),
        "argument": train(
            arg_examples,
            _alphabet([ex.arg_tags for ex in corpus]),
            FeatureConfig(window=2, extra_channels=("task",)),
            hyper,
        ),
        "argtype": train(argtype_examples, _alphabet([ex.arg_tags for ex in corpus]), base, hyper),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, model in models.items():
            save_model(model, out / f"{name}.crf")
    return models


def stats_from_corpus(corpus: list[CorpusExample]) -> TaskStats:
    return build_stats(
        [(frame.task, frozenset(frame.args)) for ex in corpus for frame in ex.frames]
    )


# ---------------------------------------------------------------------------
# Labeling metrics
# ---------------------------------------------------------------------------


def span_prf(
    gold: list[set[tuple[str, int, int]]], predicted: list[set[tuple[str, int, int]]]
) -> dict[str, float]:
    """Span-level exact match; precision is 1.0 under zero predictions."""
    tp = sum(len(g & p) for g, p in zip(gold, predicted))
    n_gold = sum(len(g) for g in gold)
    n_pred = sum(len(p) for p in predicted)
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_gold if n_gold else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def _tag_spans(tags) -> set[tuple[str, int, int]]:
    from .tasks import repair_iob

    return {(label, span.start, span.end) for label, span in spans_from_tags(repair_iob(tags))}


def eval_labeling(models: dict[str, CrfModel], test: list[CorpusExample]) -> dict[str, dict]:
    from .crf import viterbi
    from .tasks import predict_argument_tags, predict_task_tags

    report = {}
    gold_tasks, pred_tasks = [], []
    gold_args, pred_args = [], []
    gold_argtype, pred_argtype = [], []
    for ex in test:
        task_tags, _ = predict_task_tags(ex.sentence, models["task"])
        gold_tasks.append(_tag_spans(ex.task_tags))
        pred_tasks.append(_tag_spans(task_tags))
        arg_tags = predict_argument_tags(ex.sentence, ex.task_tags, models["argument"])
        gold_args.append(_tag_spans(ex.arg_tags))
        pred_args.append(_tag_spans(arg_tags))
        at_tags, _ = viterbi(models["argtype"], TrainingExample(ex.sentence))
        gold_argtype.append(_tag_spans(ex.arg_tags))
        pred_argtype.append(_tag_spans(at_tags))
    report["task"] = span_prf(gold_tasks, pred_tasks)
    report["argument"] = span_prf(gold_args, pred_args)
    report["argtype"] = span_prf(gold_argtype, pred_argtype)
    return report


# ---------------------------------------------------------------------------
# Plan-generation evaluation with a simulated participant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulatedUser:
    """Answers a missing-argument question only when the argument is genuinely
    absent from the instruction; confirms suggestions truthfully."""

    frames: tuple[GoldFrame, ...]

    def missing_answer(self, frame_index: int, argtype: str) -> str | None:
        if frame_index >= len(self.frames):
            return None
        frame = self.frames[frame_index]
        if argtype in frame.args:
            return None  # already present in the instruction
        return frame.missing.get(argtype)

    def confirm(self, true_task: str, asked_task: str) -> str:
        return "yes" if asked_task == true_task else "no"


def _match_frames(
    instances: list[TaskInstance], frames: tuple[GoldFrame, ...]
) -> list[int | None]:
    """Instance order -> gold frame index, greedy by trigger overlap."""
    taken: set[int] = set()
    out: list[int | None] = []
    for inst in instances:
        best = None
        for gi, frame in enumerate(frames):
            if gi in taken:
                continue
            if inst.trigger.overlaps(frame.trigger):
                best = gi
                break
        if best is not None:
            taken.add(best)
        out.append(best)
    return out


def _fill_missing_args(
    engine: DialogueEngine,
    instances: list[TaskInstance],
    user: SimulatedUser,
    frame_map: list[int | None],
) -> tuple[list[TaskInstance], int]:
    """The missing-information dialogue of the plan-rate experiments."""
    questions = 0
    filled = []
    for k, inst in enumerate(instances):
        arguments = dict(inst.arguments)
        for arg in engine.missing_required(inst):
            questions += 1
            answer = None
            if frame_map[k] is not None:
                answer = user.missing_answer(frame_map[k], arg)
            if answer is not None:
                # Spoken answers live outside the instruction's token range.
                base = 10_000 + 100 * len(arguments)
                arguments[arg] = Span(base, base + len(answer.split()), answer)
        try:
            filled.append(
                TaskInstance(inst.task_type, inst.trigger, arguments, inst.confidence, inst.order)
            )
        except ValueError:
            filled.append(inst)
    return filled, questions


def _static_formulate(
    instances: list[TaskInstance],
    templates: dict[str, StateTemplate],
    world: WorldModel,
) -> PlanningProblem:
    """Static-template formulation: one accumulated problem per instruction,
    instruction atoms override the session-start world, no world defaults."""
    init = set(world.fluents)
    goal: set[Fluent] = set()
    for inst in instances:
        template = templates.get(inst.task_type)
        if template is None:
            raise PlanningError(f"no template for {inst.task_type}")
        bindings = dict(inst.arguments)
        for atom in template.init_atoms:
            try:
                grounded = ground_template(atom, bindings, world.with_fluents(frozenset()))
            except MissingBindingError:
                continue
            init = {f for f in init if not contradicts(grounded, f, world)}
            init.add(grounded)
        for atom in template.goal_atoms:
            goal.add(ground_template(atom, bindings, world.with_fluents(frozenset())))
    for a in sorted(goal, key=str):
        for b in sorted(goal, key=str):
            if str(a) < str(b) and contradicts(a, b, world):
                raise InconsistentGoalError(f"accumulated goals {a} and {b} contradict")
    init_f, goal_f = frozenset(init), frozenset(goal)
    world = register_objects(world, init_f | goal_f, {})
    objects = {sym: world.catalog[sym] for f in sorted(init_f | goal_f, key=str) for sym in f.args}
    return PlanningProblem(name="static", objects=objects, init=init_f, goal=goal_f)


@dataclass
class PlanEvalResult:
    variant: str
    total_tasks: int = 0
    planned_tasks: int = 0
    questions: int = 0
    per_instruction: list[dict] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.planned_tasks / self.total_tasks if self.total_tasks else 0.0


def eval_plans(
    engine: DialogueEngine,
    corpus: list[CorpusExample],
    world: WorldModel,
    domain: PlanningDomain,
    templates: dict[str, StateTemplate],
    variant: str,
    limits: SolveLimits = SolveLimits(max_expansions=50_000, timeout=10.0),
) -> PlanEvalResult:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    use_dialogue = variant != "baseline"
    use_context = variant in ("dialogue-context", "complete")
    result = PlanEvalResult(variant=variant)

    for ex in corpus:
        sentence = resolve_pronouns(ex.sentence) if variant == "complete" else ex.sentence
        instances, _ = engine.identify(sentence)
        user = SimulatedUser(ex.frames)
        frame_map = _match_frames(instances, ex.frames)
        if use_dialogue:
            instances, questions = _fill_missing_args(engine, instances, user, frame_map)
            result.questions += questions

        total = len(ex.frames)
        planned = 0
        if instances:
            if use_context:
                outcome = chain_compound(instances, templates, world, domain, limits)
                planned = sum(
                    1
                    for e in outcome.entries
                    if e.result is not None and e.result.status is SolveStatus.SOLVED
                )
            else:
                try:
                    problem = _static_formulate(instances, templates, world)
                    if solve(domain, problem, limits).status is SolveStatus.SOLVED:
                        planned = len(instances)
                except PlanningError:
                    planned = 0
        planned = min(planned, total)
        result.total_tasks += total
        result.planned_tasks += planned
        result.per_instruction.append(
            {"text": ex.sentence.source_text, "tasks": total, "planned": planned}
        )
    return result


# ---------------------------------------------------------------------------
# Dialogue-strategy evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    text: str
    true_task: str
    kind: str


def load_scenarios(path: str | Path) -> list[Scenario]:
    scenarios = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        scenarios.append(Scenario(rec["text"], rec["true_task"], rec.get("kind", "novel")))
    return scenarios


def run_disambiguation(
    engine: DialogueEngine,
    sentence: AnnotatedSentence,
    true_task: str,
    ranker: RankedCandidates | None = None,
) -> DialogueSession:
    """Drive one forced-dialogue session with a truthful yes/no user."""
    session = engine.open_session(sentence, force_dialogue=True, ranker=ranker)
    for _ in range(2 * len(engine.catalog.names) + 4):
        if session.state in (DialogueState.INCAPABLE,):
            break
        if session.state in (DialogueState.READY,):
            break
        if session.state is DialogueState.ASK_MISSING_ARG:
            break  # type accepted; argument filling is outside this experiment
        question = engine.next_utterance(session)
        if session.state is DialogueState.INCAPABLE:
            break
        asked = engine._current_candidate(session)
        engine.handle_answer(session, "yes" if asked == true_task else "no")
    return session


def eval_dialogue_strategy(
    engine: DialogueEngine,
    scenarios: list[Scenario],
    similarity: dict[tuple[str, str], float],
    annotate,
) -> dict:
    from .dialogue import profile_arguments, rank_candidates

    rows = []
    for sc in scenarios:
        sentence = annotate(sc.text)
        count_session = run_disambiguation(engine, sentence, sc.true_task)

        root = next((t for t in sentence.tokens if t.dep == "root"), sentence.tokens[0])
        baseline_ranking = rank_by_similarity(root.lemma, similarity, engine.catalog)
        base_session = run_disambiguation(engine, sentence, sc.true_task, ranker=baseline_ranking)

        rows.append(
            {
                "text": sc.text,
                "kind": sc.kind,
                "true_task": sc.true_task,
                "count_questions": count_session.question_count,
                "count_resolved": count_session.accepted_type == sc.true_task,
                "baseline_questions": base_session.question_count,
                "baseline_resolved": base_session.accepted_type == sc.true_task,
            }
        )
    totals = {
        kind: {
            "count": sum(r["count_questions"] for r in rows if r["kind"] == kind),
            "baseline": sum(r["baseline_questions"] for r in rows if r["kind"] == kind),
        }
        for kind in sorted({r["kind"] for r in rows})
    }
    return {"scenarios": rows, "totals": totals}
