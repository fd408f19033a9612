"""Session-oriented HTTP service and the interactive terminal shell.

All session state lives in memory; events carry no timestamps so that
replaying a transcript against a fresh service reproduces them exactly.
"""
from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .annotation import fallback_annotate, resolve_pronouns
from .crf import CrfModel, load_model
from .dialogue import (
    DialogueEngine,
    DialogueSession,
    DialogueState,
    load_question_templates,
)
from .harness import load_corpus, stats_from_corpus
from .planning import (
    PlanningDomain,
    PlanningError,
    SolveLimits,
    SolveStatus,
    StateTemplate,
    WorldModel,
    chain_compound,
    emit_pddl,
    load_functional_positions,
    load_templates,
    load_world,
    parse_pddl,
    update_kb,
)
from .planning import Fluent
from .tasks import TaskTypeCatalog, load_catalog

log = logging.getLogger("convoplan.service")

DATA_DIR = Path(__file__).parent / "data"

_EMPTY_PROBLEM = "(define (problem p) (:domain domestic) (:objects) (:init) (:goal (and)))"


class ServiceError(RuntimeError):
    pass


class SessionNotFound(ServiceError):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    task_model: str = ""
    argument_model: str = ""
    argtype_model: str = ""
    catalog: str = str(DATA_DIR / "catalog.txt")
    templates: str = str(DATA_DIR / "state_templates.txt")
    domain: str = str(DATA_DIR / "domain.pddl")
    functional: str = str(DATA_DIR / "functional.tsv")
    questions: str = str(DATA_DIR / "questions.txt")
    similarity: str = str(DATA_DIR / "similarity.tsv")
    world: str = str(DATA_DIR / "world.json")
    corpus: str = str(DATA_DIR / "corpus.jsonl")
    scenarios: str = str(DATA_DIR / "scenarios.jsonl")
    confidence_threshold: float = 0.5
    max_expansions: int = 50_000
    timeout: float = 10.0
    host: str = "127.0.0.1"
    port: int = 8777
    workspace: str = "workspace"

    @property
    def solve_limits(self) -> SolveLimits:
        return SolveLimits(max_expansions=self.max_expansions, timeout=self.timeout)


def load_config(path: str | Path | None = None, **overrides) -> ServiceConfig:
    values: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ServiceError(f"{path}: config must be a mapping")
        unknown = set(loaded) - set(ServiceConfig.__dataclass_fields__)
        if unknown:
            raise ServiceError(f"{path}: unknown config keys {sorted(unknown)}")
        values.update(loaded)
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = ServiceConfig(**values)
    workspace = Path(config.workspace)
    defaults = {
        "task_model": workspace / "models" / "task.crf",
        "argument_model": workspace / "models" / "argument.crf",
        "argtype_model": workspace / "models" / "argtype.crf",
    }
    fills = {k: str(v) for k, v in defaults.items() if not getattr(config, k)}
    return replace(config, **fills) if fills else config


@dataclass
class SessionRecord:
    id: str
    dialogue: DialogueSession | None
    world: WorldModel
    events: list[dict] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class TaskService:
    """The full pipeline behind the endpoints: annotation, task identification,
    clarification dialogue, problem formulation, planning and KB update."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        models = {
            name: load_model(getattr(config, f"{name}_model"))
            for name in ("task", "argument", "argtype")
        }
        self.catalog: TaskTypeCatalog = load_catalog(config.catalog)
        corpus = load_corpus(config.corpus)
        self.engine = DialogueEngine(
            models["task"],
            models["argument"],
            models["argtype"],
            self.catalog,
            stats_from_corpus(corpus),
            load_question_templates(config.questions, self.catalog),
            confidence_threshold=config.confidence_threshold,
        )
        self.templates: dict[str, StateTemplate] = load_templates(config.templates)
        functional = load_functional_positions(config.functional)
        self.initial_world = load_world(config.world, functional)
        self.domain: PlanningDomain
        self.domain, _ = parse_pddl(Path(config.domain).read_text(), _EMPTY_PROBLEM)
        self.workspace = Path(config.workspace)
        self.sessions: dict[str, SessionRecord] = {}
        self._counter = 0

    # -- session lifecycle --------------------------------------------------

    def create_session(self) -> str:
        session_id = uuid.uuid4().hex[:12]
        self.sessions[session_id] = SessionRecord(
            id=session_id, dialogue=None, world=self.initial_world
        )
        return session_id

    def _record(self, session_id: str) -> SessionRecord:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFound(session_id) from None

    # -- event plumbing -----------------------------------------------------

    def _emit(self, record: SessionRecord, kind: str, **payload) -> dict:
        state = record.dialogue.state.value if record.dialogue else "idle"
        event = {"kind": kind, "state": state, **payload}
        record.events.append(event)
        return event

    # -- the pipeline -------------------------------------------------------

    def post_utterance(self, session_id: str, text: str) -> list[dict]:
        record = self._record(session_id)
        with record.lock:
            mark = len(record.events)
            try:
                self._handle_utterance(record, text)
            except PlanningError as exc:
                log.warning("session %s: %s", session_id, exc)
                self._emit(record, "error", text=str(exc))
            return record.events[mark:]

    def _handle_utterance(self, record: SessionRecord, text: str) -> None:
        session = record.dialogue
        if session is not None and session.state not in (
            DialogueState.READY,
            DialogueState.INCAPABLE,
            DialogueState.AWAIT_INSTRUCTION,
        ):
            self.engine.handle_answer(session, text)
        else:
            sentence = resolve_pronouns(fallback_annotate(text))
            session = self.engine.open_session(sentence)
            record.dialogue = session

        if session.state in (
            DialogueState.CONFIRM_PREDICTION,
            DialogueState.SUGGEST,
            DialogueState.CLARIFY,
            DialogueState.ASK_MISSING_ARG,
            DialogueState.ASK_STEPS,
        ):
            question = self.engine.next_utterance(session)
            if session.state is DialogueState.INCAPABLE:
                self._emit(record, "incapable", text=question)
            else:
                self._emit(record, "question", text=question)
            return
        if session.state is DialogueState.INCAPABLE:
            self._emit(record, "incapable", text=session.transcript[-1]["text"])
            return
        if session.state is DialogueState.READY:
            if session.transcript and session.transcript[-1]["speaker"] == "robot":
                self._emit(record, "utterance", text=session.transcript[-1]["text"])
            self._plan(record)

    def _plan(self, record: SessionRecord) -> None:
        session = record.dialogue
        outcome = chain_compound(
            session.resolved, self.templates, record.world, self.domain, self.config.solve_limits
        )
        for entry in outcome.entries:
            if entry.error is not None:
                self._emit(record, "error", text=entry.error)
                continue
            if entry.result.status is not SolveStatus.SOLVED:
                self._emit(record, "error", text=f"planning {entry.result.status.value}")
                continue
            steps = [str(step) for step in entry.result.plan.steps]
            self._emit(record, "plan", plan=steps)
            self._write_artifacts(record, entry)
        record.world = outcome.final_world
        self._emit(record, "state", fluents=sorted(str(f) for f in record.world.fluents))
        record.dialogue = None

    def _write_artifacts(self, record: SessionRecord, entry) -> None:
        out = self.workspace / "sessions" / record.id
        out.mkdir(parents=True, exist_ok=True)
        domain_text, problem_text = emit_pddl(self.domain, entry.problem)
        serial = len(record.artifacts) // 2
        problem_path = out / f"problem-{serial:03d}.pddl"
        plan_path = out / f"plan-{serial:03d}.txt"
        problem_path.write_text(problem_text)
        (out / "domain.pddl").write_text(domain_text)
        plan_path.write_text("\n".join(str(s) for s in entry.result.plan.steps) + "\n")
        record.artifacts.extend([str(problem_path), str(plan_path)])

    def inject_perception(self, session_id: str, fluents: list[dict]) -> dict:
        record = self._record(session_id)
        with record.lock:
            perception = frozenset(
                Fluent(f["predicate"], tuple(f["args"])) for f in fluents
            )
            record.world = update_kb(record.world, record.world.fluents, perception)
            event = self._emit(
                record, "state", fluents=sorted(str(f) for f in record.world.fluents)
            )
            return event

    def get_state(self, session_id: str) -> dict:
        record = self._record(session_id)
        session = record.dialogue
        return {
            "id": record.id,
            "fluents": sorted(str(f) for f in record.world.fluents),
            "transcript": list(session.transcript) if session else [],
            "pending_question": session.last_question
            if session and session.state not in (DialogueState.READY, DialogueState.INCAPABLE)
            else None,
            "artifacts": list(record.artifacts),
            "events": list(record.events),
        }


try:  # pydantic request bodies; module-level so FastAPI can resolve the
    from pydantic import BaseModel  # postponed annotations of the handlers

    class UtteranceBody(BaseModel):
        text: str

    class PerceptionBody(BaseModel):
        fluents: list[dict]

except ImportError:  # pragma: no cover - service extras not installed
    UtteranceBody = PerceptionBody = None


def create_app(service: TaskService):
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import StreamingResponse

    app = FastAPI(title="convoplan")

    def _guard(fn, *args):
        try:
            return fn(*args)
        except SessionNotFound as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {exc}") from exc
        except PlanningError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/sessions")
    def create_session():
        return {"id": service.create_session()}

    @app.post("/sessions/{session_id}/utterance")
    def post_utterance(session_id: str, body: UtteranceBody):
        return {"events": _guard(service.post_utterance, session_id, body.text)}

    @app.post("/sessions/{session_id}/perception")
    def post_perception(session_id: str, body: PerceptionBody):
        return _guard(service.inject_perception, session_id, body.fluents)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _guard(service.get_state, session_id)

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str):
        state = _guard(service.get_state, session_id)

        def generate():
            for event in state["events"]:
                yield f"data: {json.dumps(event, sort_keys=True)}\n\n"

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app


def run_repl(service: TaskService, input_fn=input, output_fn=print) -> None:
    """Interactive terminal dialogue over a single session."""
    session_id = service.create_session()
    output_fn(f"session {session_id}; empty line to quit")
    while True:
        try:
            line = input_fn("> ")
        except EOFError:
            break
        if not line.strip():
            break
        for event in service.post_utterance(session_id, line):
            if event["kind"] == "plan":
                output_fn("plan:")
                for step in event["plan"]:
                    output_fn(f"  {step}")
            elif event["kind"] == "state":
                output_fn(f"[{len(event['fluents'])} fluents]")
            else:
                output_fn(event.get("text", ""))
