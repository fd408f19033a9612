"""Clarification dialogue: candidate ranking from task-argument statistics,
question templates, and the per-session state machine."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .annotation import AnnotatedSentence, fallback_annotate
from .crf import CrfModel
from .tasks import (
    Span,
    TaskInstance,
    TaskTypeCatalog,
    decode_instances,
    predict_argument_tags,
    predict_task_tags,
    repair_iob,
    spans_from_tags,
)

AFFIRMATIVE = frozenset({"yes", "yeah", "yep", "correct", "right", "sure", "ok", "okay"})
NEGATIVE = frozenset({"no", "nope", "wrong", "never"})
CLARIFY_MARKERS = ("didn't understand", "dont understand", "don't understand", "what do you mean")

INCAPABLE_TEXT = "I cannot do this task, an expert's intervention is required."
STEPS_TEXT = "Please tell me the steps to do that."


class DialogueError(RuntimeError):
    pass


class IllegalStateError(DialogueError):
    pass


class DialogueState(Enum):
    AWAIT_INSTRUCTION = "await_instruction"
    CONFIRM_PREDICTION = "confirm_prediction"
    SUGGEST = "suggest"
    CLARIFY = "clarify"
    ASK_MISSING_ARG = "ask_missing_arg"
    ASK_STEPS = "ask_steps"
    READY = "ready"
    INCAPABLE = "incapable"


TERMINAL_STATES = (DialogueState.READY, DialogueState.INCAPABLE)


@dataclass(frozen=True)
class ArgTypeProfile:
    observed: frozenset[str]
    spans: dict[str, Span] = field(default_factory=dict)


@dataclass(frozen=True)
class TaskStats:
    instances: dict[str, tuple[frozenset[str], ...]]

    def count(self, task_type: str) -> int:
        return len(self.instances.get(task_type, ()))


@dataclass(frozen=True)
class RankedCandidates:
    items: tuple[tuple[str, float], ...]
    uninformative: bool = False

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.items)


@dataclass(frozen=True)
class QuestionTemplate:
    task_type: str
    suggest: str
    clarify: str
    missing: dict[str, str]


def default_templates(catalog: TaskTypeCatalog) -> dict[str, QuestionTemplate]:
    out = {}
    for entry in catalog.entries:
        out[entry.name] = QuestionTemplate(
            task_type=entry.name,
            suggest=f"Is this task similar to {entry.name.lower()} ?",
            clarify=f"Do you want me to do the {entry.name.lower()} task ?",
            missing={a: f"What is the {a} ?" for a in entry.required + entry.optional},
        )
    return out


def load_question_templates(
    path: str | Path, catalog: TaskTypeCatalog
) -> dict[str, QuestionTemplate]:
    """Template file: `[Type]` blocks with suggest:/clarify:/missing.<arg>: lines."""
    templates = default_templates(catalog)
    task = None
    fields: dict[str, str] = {}
    missing: dict[str, str] = {}

    def flush():
        if task is None:
            return
        base = templates[task]
        templates[task] = QuestionTemplate(
            task_type=task,
            suggest=fields.get("suggest", base.suggest),
            clarify=fields.get("clarify", base.clarify),
            missing={**base.missing, **missing},
        )

    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            task, fields, missing = line[1:-1], {}, {}
        elif line.startswith("missing."):
            key, _, text = line.partition(":")
            missing[key[len("missing."):].strip()] = text.strip()
        else:
            key, _, text = line.partition(":")
            fields[key.strip()] = text.strip()
    flush()
    return templates


_SPAN_PREPOSITIONS = frozenset(
    {"to", "from", "on", "in", "into", "onto", "at", "near", "with", "under", "over", "of"}
)


def _slot_text(span: Span) -> str:
    # Argument spans keep their preposition, which the question pattern
    # already supplies ("... in [goal]"), so a leading one is dropped here.
    words = span.text.split()
    if len(words) > 1 and words[0].lower() in _SPAN_PREPOSITIONS:
        words = words[1:]
    return " ".join(words)


def fill_slots(pattern: str, profile: ArgTypeProfile) -> str:
    """Replace [argtype] slots with observed spans; missing slots say 'something'."""
    out = pattern
    for argtype in set(_slot_names(pattern)):
        span = profile.spans.get(argtype)
        out = out.replace(f"[{argtype}]", _slot_text(span) if span else "something")
    return out


def _slot_names(pattern: str) -> list[str]:
    import re

    return re.findall(r"\[(\w+)\]", pattern)


def profile_arguments(sentence: AnnotatedSentence, model: CrfModel) -> ArgTypeProfile:
    """Decode the task-free argument-type CRF into an argument-type set."""
    from .crf import TrainingExample, viterbi

    tags, _ = viterbi(model, TrainingExample(sentence=sentence))
    spans = {}
    for argtype, span in spans_from_tags(repair_iob(tags), sentence):
        spans.setdefault(argtype, span)
    return ArgTypeProfile(observed=frozenset(spans), spans=spans)


def build_stats(frames: list[tuple[str, frozenset[str]]]) -> TaskStats:
    """TaskStats from (task type, argument-type set) training observations."""
    acc: dict[str, list[frozenset[str]]] = {}
    for task_type, argtypes in frames:
        acc.setdefault(task_type, []).append(frozenset(argtypes))
    return TaskStats(instances={k: tuple(v) for k, v in acc.items()})


def rank_candidates(
    profile: ArgTypeProfile, stats: TaskStats, catalog: TaskTypeCatalog
) -> RankedCandidates:
    """Order task types by the count of training instances whose argument-type
    set covers the observed one (non-strict inclusion)."""
    if not stats.instances:
        raise DialogueError("task statistics are empty")
    counts = []
    for name in catalog.names:
        counts.append(sum(1 for at_d in stats.instances.get(name, ()) if profile.observed <= at_d))
    total = sum(counts)
    if total == 0:
        uniform = 1.0 / len(catalog.names)
        return RankedCandidates(
            items=tuple((name, uniform) for name in catalog.names), uninformative=True
        )
    ranked = sorted(
        zip(catalog.names, counts), key=lambda nc: (-nc[1], catalog.order(nc[0]))
    )
    return RankedCandidates(items=tuple((name, c / total) for name, c in ranked))


def load_similarity_table(path: str | Path) -> dict[tuple[str, str], float]:
    table = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DialogueError(f"{path}:{lineno}: expected verb<TAB>task<TAB>score")
        verb, task, score_text = parts
        try:
            score = float(score_text)
        except ValueError as exc:
            raise DialogueError(f"{path}:{lineno}: bad score {score_text!r}") from exc
        if not 0.0 <= score <= 1.0:
            raise DialogueError(f"{path}:{lineno}: score {score} outside [0, 1]")
        table[(verb, task)] = score
    return table


def rank_by_similarity(
    verb: str, table: dict[tuple[str, str], float], catalog: TaskTypeCatalog
) -> RankedCandidates:
    """Baseline ranking by a file-driven verb-to-task similarity score."""
    if not any(v == verb for v, _ in table):
        uniform = 1.0 / len(catalog.names)
        return RankedCandidates(
            items=tuple((name, uniform) for name in catalog.names), uninformative=True
        )
    scores = [(name, table.get((verb, name), 0.0)) for name in catalog.names]
    ranked = sorted(scores, key=lambda ns: (-ns[1], catalog.order(ns[0])))
    total = sum(s for _, s in ranked) or 1.0
    return RankedCandidates(items=tuple((name, s / total) for name, s in ranked))


@dataclass
class DialogueSession:
    state: DialogueState = DialogueState.AWAIT_INSTRUCTION
    sentence: AnnotatedSentence | None = None
    profile: ArgTypeProfile | None = None
    candidates: RankedCandidates | None = None
    suggestions: tuple[str, ...] = ()
    cursor: int = 0
    confirm_target: str | None = None
    clarify_origin: "DialogueState | None" = None
    accepted_type: str | None = None
    pending_argument: str | None = None
    missing_queue: list[str] = field(default_factory=list)
    unfilled: list[str] = field(default_factory=list)
    draft: TaskInstance | None = None
    resolved: list[TaskInstance] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)
    question_count: int = 0
    last_question: str | None = None
    reasked: bool = False

    def say(self, speaker: str, text: str) -> None:
        self.transcript.append({"speaker": speaker, "text": text, "state": self.state.value})


class DialogueEngine:
    """Drives DialogueSession state machines over shared immutable resources."""

    def __init__(
        self,
        task_model: CrfModel,
        argument_model: CrfModel,
        argtype_model: CrfModel,
        catalog: TaskTypeCatalog,
        stats: TaskStats,
        templates: dict[str, QuestionTemplate],
        confidence_threshold: float = 0.5,
    ):
        self.task_model = task_model
        self.argument_model = argument_model
        self.argtype_model = argtype_model
        self.catalog = catalog
        self.stats = stats
        self.templates = templates
        self.confidence_threshold = confidence_threshold

    # -- pipeline helpers ---------------------------------------------------

    def identify(self, sentence: AnnotatedSentence) -> tuple[list[TaskInstance], float]:
        task_tags, confidence = predict_task_tags(sentence, self.task_model)
        task_tags = repair_iob(task_tags)
        arg_tags = repair_iob(predict_argument_tags(sentence, task_tags, self.argument_model))
        return decode_instances(sentence, task_tags, arg_tags, self.catalog, confidence), confidence

    def _task_vocabulary(self) -> frozenset[str]:
        if not hasattr(self, "_vocab_cache"):
            self._vocab_cache = frozenset(self.task_model.obs_features)
        return self._vocab_cache

    def missing_required(self, instance: TaskInstance) -> list[str]:
        entry = self.catalog.entry(instance.task_type)
        return [a for a in entry.required if a not in instance.arguments]

    # -- session lifecycle --------------------------------------------------

    def open_session(
        self,
        sentence: AnnotatedSentence,
        force_dialogue: bool = False,
        ranker: RankedCandidates | None = None,
    ) -> DialogueSession:
        session = DialogueSession(sentence=sentence)
        session.say("human", sentence.source_text)
        instances, confidence = self.identify(sentence)

        if instances and confidence >= self.confidence_threshold and not force_dialogue:
            session.resolved = instances
            self._queue_missing(session)
            return session

        session.profile = profile_arguments(sentence, self.argtype_model)
        session.candidates = ranker or rank_candidates(session.profile, self.stats, self.catalog)
        # An unseen trigger word carries no evidence, so its decode counts as
        # an empty prediction and the top-ranked candidate is confirmed instead.
        predicted = None
        if instances:
            trigger_word = instances[0].trigger.text.split()[0]
            if f"w0={trigger_word}" in self._task_vocabulary():
                predicted = instances[0].task_type
        session.confirm_target = predicted or session.candidates.names[0]
        session.draft = instances[0] if instances else None
        session.suggestions = tuple(
            name for name in session.candidates.names if name != session.confirm_target
        )
        session.state = DialogueState.CONFIRM_PREDICTION
        return session

    def _queue_missing(self, session: DialogueSession) -> None:
        session.missing_queue = []
        for k, inst in enumerate(session.resolved):
            for arg in self.missing_required(inst):
                session.missing_queue.append(f"{k}:{arg}")
        if session.missing_queue:
            session.state = DialogueState.ASK_MISSING_ARG
        else:
            session.state = DialogueState.READY

    def _accept(self, session: DialogueSession, task_type: str) -> None:
        session.accepted_type = task_type
        entry = self.catalog.entry(task_type)
        allowed = set(entry.required + entry.optional)
        profile = session.profile or ArgTypeProfile(frozenset())
        arguments = {a: s for a, s in profile.spans.items() if a in allowed}
        trigger = self._trigger_span(session)
        arguments = {a: s for a, s in arguments.items() if not s.overlaps(trigger)}
        session.resolved = [
            TaskInstance(task_type=task_type, trigger=trigger, arguments=arguments, confidence=1.0)
        ]
        session.say("robot", "Got it.")
        self._queue_missing(session)

    def _trigger_span(self, session: DialogueSession) -> Span:
        if session.draft is not None:
            return session.draft.trigger
        sentence = session.sentence
        root = next((t for t in sentence.tokens if t.dep == "root"), sentence.tokens[0])
        return Span(root.index, root.index + 1, root.text)

    # -- state machine ------------------------------------------------------

    def next_utterance(self, session: DialogueSession) -> str:
        if session.state in TERMINAL_STATES:
            raise IllegalStateError(f"session is terminal ({session.state.value})")
        if session.state is DialogueState.AWAIT_INSTRUCTION:
            raise IllegalStateError("no instruction yet")

        if session.state is DialogueState.CONFIRM_PREDICTION:
            text = self.templates[session.confirm_target].suggest
        elif session.state is DialogueState.SUGGEST:
            if session.cursor >= len(session.suggestions):
                session.state = DialogueState.INCAPABLE
                session.say("robot", INCAPABLE_TEXT)
                return INCAPABLE_TEXT
            text = self.templates[session.suggestions[session.cursor]].suggest
        elif session.state is DialogueState.CLARIFY:
            candidate = self._current_candidate(session)
            text = fill_slots(
                self.templates[candidate].clarify, session.profile or ArgTypeProfile(frozenset())
            )
        elif session.state is DialogueState.ASK_MISSING_ARG:
            slot = session.missing_queue[0]
            k, arg = slot.split(":")
            session.pending_argument = arg
            text = self.templates[session.resolved[int(k)].task_type].missing.get(
                arg, f"What is the {arg} ?"
            )
        elif session.state is DialogueState.ASK_STEPS:
            text = STEPS_TEXT
        else:  # pragma: no cover - all states handled
            raise IllegalStateError(str(session.state))

        session.question_count += 1
        session.last_question = text
        session.say("robot", text)
        return text

    def _current_candidate(self, session: DialogueSession) -> str:
        state = session.state
        if state is DialogueState.CLARIFY and session.clarify_origin is not None:
            state = session.clarify_origin
        if state is DialogueState.CONFIRM_PREDICTION:
            return session.confirm_target
        return session.suggestions[min(session.cursor, len(session.suggestions) - 1)]

    def handle_answer(self, session: DialogueSession, answer: str) -> None:
        if session.state in TERMINAL_STATES:
            raise IllegalStateError(f"session is terminal ({session.state.value})")
        session.say("human", answer)
        normalized = answer.strip().lower().rstrip(".!?").strip()

        if session.state is DialogueState.ASK_MISSING_ARG:
            self._bind_missing(session, answer)
            return
        if session.state is DialogueState.ASK_STEPS:
            self._ingest_steps(session, answer)
            return

        if normalized == "how" or any(marker in normalized for marker in CLARIFY_MARKERS):
            if session.state in (DialogueState.CONFIRM_PREDICTION, DialogueState.SUGGEST):
                session.clarify_origin = session.state
                session.state = DialogueState.CLARIFY
            return

        words = set(normalized.split())
        if words & AFFIRMATIVE:
            self._accept(session, self._current_candidate(session))
        elif words & NEGATIVE:
            self._reject_current(session)
        else:
            if not session.reasked:
                session.reasked = True  # next_utterance re-emits the same question
            else:
                session.reasked = False
                self._reject_current(session)

    def _reject_current(self, session: DialogueSession) -> None:
        if session.state is DialogueState.CLARIFY:
            session.state = session.clarify_origin or DialogueState.SUGGEST
        if session.state is DialogueState.CONFIRM_PREDICTION:
            session.state = DialogueState.SUGGEST
            session.cursor = 0
        else:
            session.cursor += 1
            session.state = DialogueState.SUGGEST
        if session.cursor >= len(session.suggestions):
            session.state = DialogueState.INCAPABLE
            session.say("robot", INCAPABLE_TEXT)

    def _bind_missing(self, session: DialogueSession, answer: str) -> None:
        slot = session.missing_queue.pop(0)
        k, arg = slot.split(":")
        inst = session.resolved[int(k)]
        span = _answer_span(answer)
        if span is None:
            if not session.reasked:
                session.reasked = True
                session.missing_queue.insert(0, slot)
                return
            session.reasked = False
            session.unfilled.append(slot)
        else:
            arguments = dict(inst.arguments)
            arguments[arg] = span
            try:
                session.resolved[int(k)] = TaskInstance(
                    task_type=inst.task_type,
                    trigger=inst.trigger,
                    arguments=arguments,
                    confidence=inst.confidence,
                    order=inst.order,
                )
            except ValueError:
                session.unfilled.append(slot)
        session.pending_argument = None
        if not session.missing_queue:
            session.state = DialogueState.READY

    def _ingest_steps(self, session: DialogueSession, answer: str) -> None:
        sentence = fallback_annotate(answer)
        instances, _ = self.identify(sentence)
        if not instances:
            session.state = DialogueState.INCAPABLE
            session.say("robot", INCAPABLE_TEXT)
            return
        session.sentence = sentence
        session.resolved = instances
        self._queue_missing(session)

    def request_steps(self, session: DialogueSession) -> None:
        if session.state not in (DialogueState.INCAPABLE, DialogueState.SUGGEST, DialogueState.CONFIRM_PREDICTION):
            raise IllegalStateError("steps can only be requested for unresolved tasks")
        session.state = DialogueState.ASK_STEPS


def _answer_span(answer: str) -> Span | None:
    """The answer's noun phrase as an out-of-sentence span (text carries it)."""
    text = answer.strip()
    if not text:
        return None
    from .planning import normalize_symbol

    if normalize_symbol(text) is None:
        return None
    words = text.split()
    # Indices sit past any real sentence so the span never overlaps one.
    return Span(10_000, 10_000 + len(words), text)


def export_transcript(session: DialogueSession) -> list[dict]:
    """Transcript entries with timestamps, ready for JSONL export."""
    import datetime

    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return [{**entry, "timestamp": stamp} for entry in session.transcript]
