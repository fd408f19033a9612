"""Two-stage frame labeling: task-type spans, then argument spans conditioned
on the task channel, decoded into TaskInstance structures."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .annotation import AnnotatedSentence
from .crf import CrfModel, TrainingExample, viterbi, marginal_confidence

TASK_CHANNEL = "task"
NO_TASK = "<NONE>"


class CatalogError(ValueError):
    pass


class IobTag(NamedTuple):
    prefix: str  # B, I or O
    label: str | None

    @classmethod
    def parse(cls, tag: str) -> "IobTag":
        if tag == "O":
            return cls("O", None)
        prefix, _, label = tag.partition("-")
        if prefix not in ("B", "I") or not label:
            raise ValueError(f"malformed IOB tag {tag!r}")
        return cls(prefix, label)

    def __str__(self) -> str:
        return "O" if self.prefix == "O" else f"{self.prefix}-{self.label}"


@dataclass(frozen=True)
class Span:
    start: int
    end: int  # exclusive
    text: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span [{self.start}, {self.end})")

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    required: tuple[str, ...]
    optional: tuple[str, ...]


@dataclass(frozen=True)
class TaskTypeCatalog:
    entries: tuple[CatalogEntry, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise CatalogError("duplicate task type names in catalog")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def entry(self, name: str) -> CatalogEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise CatalogError(f"unknown task type {name!r}")

    def order(self, name: str) -> int:
        return self.names.index(name)

    @property
    def argument_types(self) -> tuple[str, ...]:
        seen: list[str] = []
        for e in self.entries:
            for a in e.required + e.optional:
                if a not in seen:
                    seen.append(a)
        return tuple(seen)


def load_catalog(path: str | Path) -> TaskTypeCatalog:
    """Catalog file: one `[Name]` block with `required:`/`optional:` lists."""
    entries = []
    name = None
    required: tuple[str, ...] = ()
    optional: tuple[str, ...] = ()

    def flush():
        if name is not None:
            entries.append(CatalogEntry(name, required, optional))

    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            name, required, optional = line[1:-1], (), ()
        elif line.startswith("required:"):
            required = tuple(v for v in line[len("required:"):].replace(",", " ").split() if v)
        elif line.startswith("optional:"):
            optional = tuple(v for v in line[len("optional:"):].replace(",", " ").split() if v)
        else:
            raise CatalogError(f"{path}:{lineno}: unrecognized line {line!r}")
    flush()
    return TaskTypeCatalog(tuple(entries))


@dataclass(frozen=True)
class TaskInstance:
    task_type: str
    trigger: Span
    arguments: dict[str, Span] = field(default_factory=dict)
    confidence: float = 1.0
    order: int = 0

    def __post_init__(self):
        spans = list(self.arguments.values())
        for i, a in enumerate(spans):
            if a.overlaps(self.trigger):
                raise ValueError(f"argument span {a} overlaps the trigger")
            for b in spans[i + 1 :]:
                if a.overlaps(b):
                    raise ValueError(f"argument spans {a} and {b} overlap")


def predict_task_tags(
    sentence: AnnotatedSentence, model: CrfModel
) -> tuple[tuple[str, ...], float]:
    example = TrainingExample(sentence=sentence)
    tags, _ = viterbi(model, example)
    return tags, marginal_confidence(model, example, tags)


def task_channel_values(task_tags: tuple[str, ...] | list[str]) -> tuple[str, ...]:
    """Per-token task label, propagated rightward from the nearest preceding B."""
    values = []
    current = NO_TASK
    for tag in task_tags:
        parsed = IobTag.parse(tag)
        if parsed.prefix == "B":
            current = parsed.label or NO_TASK
        values.append(current)
    return tuple(values)


def predict_argument_tags(
    sentence: AnnotatedSentence, task_tags: tuple[str, ...] | list[str], model: CrfModel
) -> tuple[str, ...]:
    if len(task_tags) != len(sentence):
        raise ValueError("task tag sequence length mismatch")
    aux = {TASK_CHANNEL: task_channel_values(task_tags)}
    tags, _ = viterbi(model, TrainingExample(sentence=sentence, aux=aux))
    return tags


def repair_iob(tags: tuple[str, ...] | list[str]) -> tuple[str, ...]:
    """Turn orphan or label-switching I tags into B; idempotent."""
    repaired = []
    open_label = None
    for tag in tags:
        parsed = IobTag.parse(tag)
        if parsed.prefix == "O":
            open_label = None
            repaired.append("O")
        elif parsed.prefix == "B":
            open_label = parsed.label
            repaired.append(tag)
        else:  # I
            if parsed.label == open_label:
                repaired.append(tag)
            else:
                open_label = parsed.label
                repaired.append(f"B-{parsed.label}")
    return tuple(repaired)


def spans_from_tags(
    tags: tuple[str, ...] | list[str], sentence: AnnotatedSentence | None = None
) -> list[tuple[str, Span]]:
    """(label, span) pairs from a well-formed IOB sequence."""
    words = sentence.words if sentence is not None else tuple("" for _ in tags)
    out: list[tuple[str, Span]] = []
    start, label = None, None
    for i, tag in enumerate(tuple(tags) + ("O",)):
        parsed = IobTag.parse(tag) if tag != "O" else IobTag("O", None)
        if parsed.prefix != "I" and start is not None:
            out.append((label, Span(start, i, " ".join(words[start:i]))))
            start, label = None, None
        if parsed.prefix == "B":
            start, label = i, parsed.label
    return out


def decode_instances(
    sentence: AnnotatedSentence,
    task_tags: tuple[str, ...] | list[str],
    arg_tags: tuple[str, ...] | list[str],
    catalog: TaskTypeCatalog,
    confidence: float = 1.0,
) -> list[TaskInstance]:
    """One TaskInstance per task span; each argument attaches to the nearest
    preceding trigger (or the first task when none precedes)."""
    triggers = spans_from_tags(repair_iob(task_tags), sentence)
    if not triggers:
        return []
    args = spans_from_tags(repair_iob(arg_tags), sentence)

    assigned: list[dict[str, Span]] = [{} for _ in triggers]
    for argtype, span in args:
        owner = 0
        for k, (_, trig) in enumerate(triggers):
            if trig.start <= span.start:
                owner = k
        trig = triggers[owner][1]
        if span.overlaps(trig):
            continue
        if argtype not in assigned[owner]:
            assigned[owner][argtype] = span

    instances = []
    for order, ((task_type, trig), arguments) in enumerate(zip(triggers, assigned)):
        instances.append(
            TaskInstance(
                task_type=task_type,
                trigger=trig,
                arguments=arguments,
                confidence=confidence,
                order=order,
            )
        )
    return instances


def encode_instances(
    instances: list[TaskInstance], length: int
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Inverse of decode_instances for non-overlapping spans."""
    task_tags = ["O"] * length
    arg_tags = ["O"] * length
    for inst in instances:
        for i in range(inst.trigger.start, inst.trigger.end):
            task_tags[i] = f"{'B' if i == inst.trigger.start else 'I'}-{inst.task_type}"
        for argtype, span in inst.arguments.items():
            for i in range(span.start, span.end):
                arg_tags[i] = f"{'B' if i == span.start else 'I'}-{argtype}"
    return tuple(task_tags), tuple(arg_tags)
