"""Symbolic planning: state templates, world-model reconciliation, PDDL text,
an embedded forward-search STRIPS planner, plan simulation and KB update."""
from __future__ import annotations

import heapq
import itertools
import re
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .annotation import _guess_pos
from .tasks import Span, TaskInstance


class PlanningError(ValueError):
    pass


class MissingBindingError(PlanningError):
    def __init__(self, argument_type: str):
        super().__init__(f"no binding or world-derived default for argument type {argument_type!r}")
        self.argument_type = argument_type


class InconsistentGoalError(PlanningError):
    pass


class InconsistentPerceptionError(PlanningError):
    pass


class InvalidPlanError(PlanningError):
    def __init__(self, step_index: int, message: str):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index


class PddlParseError(PlanningError):
    pass


class UnsupportedFeatureError(PddlParseError):
    pass


@dataclass(frozen=True)
class Fluent:
    predicate: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(self.args)})"


@dataclass(frozen=True)
class TemplateAtom:
    predicate: str
    slots: tuple[str, ...]  # constants, or variables written [argtype]

    @staticmethod
    def is_variable(slot: str) -> bool:
        return slot.startswith("[") and slot.endswith("]")

    @staticmethod
    def variable_name(slot: str) -> str:
        return slot[1:-1]


@dataclass(frozen=True)
class StateTemplate:
    task_type: str
    init_atoms: tuple[TemplateAtom, ...]
    goal_atoms: tuple[TemplateAtom, ...]


@dataclass(frozen=True)
class Operator:
    name: str
    params: tuple[tuple[str, str], ...]  # (variable, category)
    precondition: frozenset[Fluent]  # args may be parameter variables
    add: frozenset[Fluent]
    delete: frozenset[Fluent]


@dataclass(frozen=True)
class PlanningDomain:
    name: str
    predicates: dict[str, int]  # name -> arity
    categories: tuple[str, ...]
    operators: tuple[Operator, ...]

    def __post_init__(self):
        for op in self.operators:
            for atom in op.precondition | op.add | op.delete:
                if atom.predicate not in self.predicates:
                    raise PlanningError(f"operator {op.name} references undeclared {atom.predicate}")


@dataclass(frozen=True)
class PlanningProblem:
    name: str
    objects: dict[str, str]  # symbol -> category
    init: frozenset[Fluent]
    goal: frozenset[Fluent]


@dataclass(frozen=True)
class PlanStep:
    operator: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.operator}({', '.join(self.args)})"


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]


class SolveStatus(Enum):
    SOLVED = "solved"
    UNSOLVABLE = "unsolvable"
    RESOURCE_LIMIT = "resource-limit"


@dataclass(frozen=True)
class SolveLimits:
    max_expansions: int = 200_000
    timeout: float = 30.0


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    plan: Plan | None = None
    expansions: int = 0
    generated: int = 0


@dataclass(frozen=True)
class WorldModel:
    fluents: frozenset[Fluent]
    functional_positions: dict[str, tuple[int, ...]]
    catalog: dict[str, str]  # symbol -> category

    def with_fluents(self, fluents: frozenset[Fluent]) -> "WorldModel":
        return replace(self, fluents=fluents)

    def with_symbol(self, symbol: str, category: str) -> "WorldModel":
        if symbol in self.catalog:
            return self
        return replace(self, catalog={**self.catalog, symbol: category})


# Argument types whose symbols default to these catalog categories when unseen.
ARGTYPE_CATEGORY = {
    "source": "location",
    "goal": "location",
    "theme": "object",
    "device": "device",
    "state": "state",
    "cotheme": "person",
}


def contradicts(a: Fluent, b: Fluent, world: WorldModel) -> bool:
    """Same predicate, equal non-functional positions, differing functional one."""
    if a.predicate != b.predicate or len(a.args) != len(b.args):
        return False
    functional = set(world.functional_positions.get(a.predicate, ()))
    if not functional:
        return False
    same_free = all(x == y for i, (x, y) in enumerate(zip(a.args, b.args)) if i not in functional)
    differs = any(x != y for i, (x, y) in enumerate(zip(a.args, b.args)) if i in functional)
    return same_free and differs


def normalize_symbol(text: str) -> str | None:
    """Head-noun symbol of a span text: lowercase, determiners/prepositions
    stripped; None when the span holds no noun."""
    words = [w.lower() for w in re.findall(r"[A-Za-z']+|[0-9]+", text)]
    nouns = [w for w in words if _guess_pos(w) in ("NOUN", "NUM")]
    if nouns:
        return nouns[-1]
    # Nounless single-word spans ("on", "off") name a symbol directly;
    # pronouns stay ungroundable.
    if len(words) == 1 and _guess_pos(words[0]) != "PRON":
        return words[0]
    return None


def ground_template(
    atom: TemplateAtom,
    bindings: dict[str, Span | str],
    world: WorldModel,
) -> Fluent:
    args = []
    for slot in atom.slots:
        if not TemplateAtom.is_variable(slot):
            args.append(slot)
            continue
        var = TemplateAtom.variable_name(slot)
        bound = bindings.get(var)
        if bound is None:
            symbol = _world_default(atom, var, bindings, world)
        else:
            text = bound.text if isinstance(bound, Span) else bound
            symbol = normalize_symbol(text)
        if symbol is None:
            raise MissingBindingError(var)
        args.append(symbol)
    return Fluent(atom.predicate, tuple(args))


def _world_default(
    atom: TemplateAtom, var: str, bindings: dict[str, Span | str], world: WorldModel
) -> str | None:
    """Unique world fluent matching the atom's bound slots fills the hole."""
    known: dict[int, str] = {}
    hole = None
    for i, slot in enumerate(atom.slots):
        if not TemplateAtom.is_variable(slot):
            known[i] = slot
            continue
        name = TemplateAtom.variable_name(slot)
        if name == var:
            hole = i
        else:
            bound = bindings.get(name)
            if bound is None:
                return None
            text = bound.text if isinstance(bound, Span) else bound
            symbol = normalize_symbol(text)
            if symbol is None:
                return None
            known[i] = symbol
    candidates = {
        f.args[hole]
        for f in world.fluents
        if f.predicate == atom.predicate
        and len(f.args) == len(atom.slots)
        and all(f.args[i] == v for i, v in known.items())
    }
    return candidates.pop() if len(candidates) == 1 else None


def register_objects(world: WorldModel, fluents: frozenset[Fluent], hints: dict[str, str]) -> WorldModel:
    for f in sorted(fluents, key=str):
        for sym in f.args:
            world = world.with_symbol(sym, hints.get(sym, "object"))
    return world


def formulate_problem(
    task: TaskInstance,
    template: StateTemplate,
    world: WorldModel,
    name: str = "generated",
) -> tuple[PlanningProblem, WorldModel]:
    """Algorithm: init starts from the world fluents; grounded init atoms merge
    in unless an existing world fluent contradicts them (world priority); goal
    atoms must ground fully and be mutually consistent."""
    if template.task_type != task.task_type:
        raise PlanningError(f"template {template.task_type} does not match task {task.task_type}")
    hints: dict[str, str] = {}
    bindings: dict[str, Span | str] = dict(task.arguments)
    for argtype, span in task.arguments.items():
        symbol = normalize_symbol(span.text if isinstance(span, Span) else span)
        if symbol is not None and symbol not in world.catalog:
            hints[symbol] = ARGTYPE_CATEGORY.get(argtype, "object")

    init = set(world.fluents)
    for atom in template.init_atoms:
        try:
            grounded = ground_template(atom, bindings, world)
        except MissingBindingError:
            # Init atoms are assumptions; an unverifiable one is dropped and the
            # actual world state stands in for it.
            continue
        if not any(contradicts(grounded, existing, world) for existing in init):
            init.add(grounded)

    goal = set()
    for atom in template.goal_atoms:
        goal.add(ground_template(atom, bindings, world))
    for a, b in itertools.combinations(sorted(goal, key=str), 2):
        if contradicts(a, b, world):
            raise InconsistentGoalError(f"goal atoms {a} and {b} contradict")

    init_f, goal_f = frozenset(init), frozenset(goal)
    world = register_objects(world, init_f | goal_f, hints)
    objects = {
        sym: world.catalog[sym] for f in sorted(init_f | goal_f, key=str) for sym in f.args
    }
    return PlanningProblem(name=name, objects=objects, init=init_f, goal=goal_f), world


def _ground_operator(op: Operator, binding: dict[str, str]) -> PlanStep | None:
    return PlanStep(op.name, tuple(binding[v] for v, _ in op.params))


def _substitute(atoms: frozenset[Fluent], binding: dict[str, str]) -> frozenset[Fluent]:
    return frozenset(
        Fluent(a.predicate, tuple(binding.get(arg, arg) for arg in a.args)) for a in atoms
    )


@dataclass(frozen=True)
class GroundAction:
    step: PlanStep
    precondition: frozenset[Fluent]
    add: frozenset[Fluent]
    delete: frozenset[Fluent]


def ground_actions(domain: PlanningDomain, objects: dict[str, str]) -> list[GroundAction]:
    by_category: dict[str, list[str]] = {}
    for sym in sorted(objects):
        by_category.setdefault(objects[sym], []).append(sym)
    actions = []
    for op in domain.operators:
        pools = [by_category.get(cat, []) for _, cat in op.params]
        for combo in itertools.product(*pools):
            if len(set(combo)) != len(combo):
                continue
            binding = {v: c for (v, _), c in zip(op.params, combo)}
            actions.append(
                GroundAction(
                    step=PlanStep(op.name, combo),
                    precondition=_substitute(op.precondition, binding),
                    add=_substitute(op.add, binding),
                    delete=_substitute(op.delete, binding),
                )
            )
    return actions


def _h_add(state: frozenset[Fluent], goal: frozenset[Fluent], actions: list[GroundAction]) -> float:
    """Additive delete-relaxation heuristic."""
    cost: dict[Fluent, float] = {f: 0.0 for f in state}
    changed = True
    while changed:
        changed = False
        for act in actions:
            try:
                c = sum(cost[p] for p in act.precondition) + 1.0
            except KeyError:
                continue
            for f in act.add:
                if c < cost.get(f, float("inf")):
                    cost[f] = c
                    changed = True
    total = 0.0
    for g in goal:
        if g not in cost:
            return float("inf")
        total += cost[g]
    return total


def solve(
    domain: PlanningDomain, problem: PlanningProblem, limits: SolveLimits = SolveLimits()
) -> SolveResult:
    """Forward A* over grounded operators with the additive heuristic."""
    actions = ground_actions(domain, problem.objects)
    goal = problem.goal
    start = problem.init
    deadline = time.monotonic() + limits.timeout

    h0 = _h_add(start, goal, actions)
    if h0 == float("inf"):
        return SolveResult(SolveStatus.UNSOLVABLE)

    counter = itertools.count()
    open_heap: list[tuple[float, int, frozenset[Fluent]]] = [(h0, next(counter), start)]
    g_cost: dict[frozenset[Fluent], int] = {start: 0}
    parent: dict[frozenset[Fluent], tuple[frozenset[Fluent], PlanStep] | None] = {start: None}
    expansions = 0
    generated = 1

    while open_heap:
        if expansions >= limits.max_expansions or time.monotonic() > deadline:
            return SolveResult(SolveStatus.RESOURCE_LIMIT, expansions=expansions, generated=generated)
        _, _, state = heapq.heappop(open_heap)
        if goal <= state:
            steps = []
            node = state
            while parent[node] is not None:
                node, step = parent[node]
                steps.append(step)
            steps.reverse()
            return SolveResult(
                SolveStatus.SOLVED, plan=Plan(tuple(steps)), expansions=expansions, generated=generated
            )
        expansions += 1
        for act in actions:
            if not act.precondition <= state:
                continue
            succ = frozenset((state - act.delete) | act.add)
            new_g = g_cost[state] + 1
            if new_g < g_cost.get(succ, float("inf")):
                g_cost[succ] = new_g
                parent[succ] = (state, act.step)
                h = _h_add(succ, goal, actions)
                if h == float("inf"):
                    continue
                heapq.heappush(open_heap, (new_g + h, next(counter), succ))
                generated += 1
    return SolveResult(SolveStatus.UNSOLVABLE, expansions=expansions, generated=generated)


def simulate(domain: PlanningDomain, init: frozenset[Fluent], plan: Plan) -> frozenset[Fluent]:
    ops = {op.name: op for op in domain.operators}
    state = frozenset(init)
    for i, step in enumerate(plan.steps):
        op = ops.get(step.operator)
        if op is None:
            raise InvalidPlanError(i, f"unknown operator {step.operator!r}")
        if len(step.args) != len(op.params):
            raise InvalidPlanError(i, f"arity mismatch for {step.operator}")
        binding = {v: a for (v, _), a in zip(op.params, step.args)}
        pre = _substitute(op.precondition, binding)
        if not pre <= state:
            missing = sorted(str(f) for f in pre - state)
            raise InvalidPlanError(i, f"precondition not satisfied: {missing}")
        state = frozenset((state - _substitute(op.delete, binding)) | _substitute(op.add, binding))
    return state


def update_kb(
    world: WorldModel, planned_result: frozenset[Fluent], perception: frozenset[Fluent]
) -> WorldModel:
    """Perception-priority fusion of planner-predicted state and perception."""
    perception_sorted = sorted(perception, key=str)
    for a, b in itertools.combinations(perception_sorted, 2):
        if contradicts(a, b, world):
            raise InconsistentPerceptionError(f"perception fluents {a} and {b} contradict")
    result = set(planned_result)
    for p in perception_sorted:
        result = {f for f in result if not contradicts(p, f, world)}
        result.add(p)
    new_world = world.with_fluents(frozenset(result))
    return register_objects(new_world, frozenset(result), {})


@dataclass(frozen=True)
class ChainEntry:
    task_index: int
    problem: PlanningProblem | None
    result: SolveResult | None
    error: str | None = None


@dataclass(frozen=True)
class ChainOutcome:
    entries: tuple[ChainEntry, ...]
    skipped: tuple[int, ...]
    final_world: WorldModel


def chain_compound(
    tasks: list[TaskInstance],
    templates: dict[str, StateTemplate],
    world: WorldModel,
    domain: PlanningDomain,
    limits: SolveLimits = SolveLimits(),
) -> ChainOutcome:
    """Solve serialized tasks, threading each simulated result state into the
    next task's formulation; a failure skips the dependent remainder."""
    entries: list[ChainEntry] = []
    for k, task in enumerate(tasks):
        template = templates.get(task.task_type)
        if template is None:
            entries.append(ChainEntry(k, None, None, error=f"no template for {task.task_type}"))
            break
        try:
            problem, world = formulate_problem(task, template, world, name=f"task-{k}")
        except PlanningError as exc:
            entries.append(ChainEntry(k, None, None, error=str(exc)))
            break
        result = solve(domain, problem, limits)
        entries.append(ChainEntry(k, problem, result))
        if result.status is not SolveStatus.SOLVED:
            break
        world = world.with_fluents(simulate(domain, problem.init, result.plan))
    skipped = tuple(range(len(entries), len(tasks)))
    return ChainOutcome(entries=tuple(entries), skipped=skipped, final_world=world)


# ---------------------------------------------------------------------------
# PDDL text emission and parsing (STRIPS subset)
# ---------------------------------------------------------------------------

_UNSUPPORTED = {
    ":functions",
    ":constraints",
    ":derived",
    "when",
    "forall",
    "exists",
    "or",
    "imply",
    "=",
    "increase",
    "decrease",
    "assign",
}


def _atom_sexp(f: Fluent, variables: bool = False) -> str:
    args = " ".join((f"?{a}" if variables else a) for a in f.args)
    return f"({f.predicate} {args})" if args else f"({f.predicate})"


def emit_pddl(domain: PlanningDomain, problem: PlanningProblem) -> tuple[str, str]:
    """Deterministic STRIPS PDDL text (alphabetical within every section)."""
    lines = [f"(define (domain {domain.name})"]
    lines.append("  (:requirements :strips :typing)")
    lines.append("  (:types " + " ".join(sorted(domain.categories)) + ")")
    preds = []
    for name in sorted(domain.predicates):
        args = " ".join(f"?x{i}" for i in range(domain.predicates[name]))
        preds.append(f"({name} {args})" if args else f"({name})")
    lines.append("  (:predicates " + " ".join(preds) + ")")
    for op in sorted(domain.operators, key=lambda o: o.name):
        params = " ".join(f"?{v} - {c}" for v, c in op.params)
        pre = " ".join(sorted(_atom_sexp(f, variables=True) for f in op.precondition))
        adds = sorted(_atom_sexp(f, variables=True) for f in op.add)
        dels = sorted(f"(not {_atom_sexp(f, variables=True)})" for f in op.delete)
        effect = " ".join(adds + dels)
        lines.append(f"  (:action {op.name}")
        lines.append(f"    :parameters ({params})")
        lines.append(f"    :precondition (and {pre})")
        lines.append(f"    :effect (and {effect})")
        lines.append("  )")
    lines.append(")")
    domain_text = "\n".join(lines) + "\n"

    lines = [f"(define (problem {problem.name})", f"  (:domain {domain.name})"]
    objs = " ".join(f"{sym} - {cat}" for sym, cat in sorted(problem.objects.items()))
    lines.append(f"  (:objects {objs})")
    init = " ".join(sorted(_atom_sexp(f) for f in problem.init))
    lines.append(f"  (:init {init})")
    goal = " ".join(sorted(_atom_sexp(f) for f in problem.goal))
    lines.append(f"  (:goal (and {goal}))")
    lines.append(")")
    return domain_text, "\n".join(lines) + "\n"


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    line = 1
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c.isspace():
            i += 1
        elif c == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append((c, line))
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append((text[i:j], line))
            i = j
    return tokens


def _parse_sexp(tokens: list[tuple[str, int]]) -> list:
    def parse(pos: int):
        tok, line = tokens[pos]
        if tok == "(":
            items = []
            pos += 1
            while pos < len(tokens) and tokens[pos][0] != ")":
                item, pos = parse(pos)
                items.append(item)
            if pos >= len(tokens):
                raise PddlParseError(f"line {line}: unbalanced parenthesis")
            return items, pos + 1
        if tok == ")":
            raise PddlParseError(f"line {line}: unexpected ')'")
        if tok.lower() in _UNSUPPORTED:
            raise UnsupportedFeatureError(f"line {line}: unsupported construct {tok!r}")
        return tok.lower(), pos + 1

    tree, end = parse(0)
    if end != len(tokens):
        raise PddlParseError(f"line {tokens[end][1]}: trailing tokens")
    return tree


def _parse_typed_list(items: list[str]) -> list[tuple[str, str]]:
    out = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        if items[i] == "-":
            category = items[i + 1]
            out.extend((name, category) for name in pending)
            pending = []
            i += 2
        else:
            pending.append(items[i])
            i += 1
    out.extend((name, "object") for name in pending)
    return out


def _parse_atom(sexp: list) -> Fluent:
    if not sexp or not isinstance(sexp[0], str):
        raise PddlParseError(f"malformed atom {sexp!r}")
    return Fluent(sexp[0], tuple(a.lstrip("?") for a in sexp[1:]))


def _parse_conjunction(sexp) -> tuple[list[Fluent], list[Fluent]]:
    """(positives, negatives) of an (and ...) or bare atom."""
    pos, neg = [], []
    parts = sexp[1:] if sexp and sexp[0] == "and" else [sexp]
    for part in parts:
        if part and part[0] == "not":
            neg.append(_parse_atom(part[1]))
        else:
            pos.append(_parse_atom(part))
    return pos, neg


def parse_pddl(domain_text: str, problem_text: str) -> tuple[PlanningDomain, PlanningProblem]:
    dtree = _parse_sexp(_tokenize(domain_text))
    if dtree[0] != "define" or dtree[1][0] != "domain":
        raise PddlParseError("not a PDDL domain definition")
    name = dtree[1][1]
    predicates: dict[str, int] = {}
    categories: tuple[str, ...] = ()
    operators: list[Operator] = []
    for section in dtree[2:]:
        key = section[0]
        if key == ":requirements":
            for req in section[1:]:
                if req not in (":strips", ":typing"):
                    raise UnsupportedFeatureError(f"unsupported requirement {req}")
        elif key == ":types":
            categories = tuple(section[1:])
        elif key == ":predicates":
            for p in section[1:]:
                predicates[p[0]] = len(p) - 1
        elif key == ":action":
            op_name = section[1]
            body = dict(zip(section[2::2], section[3::2]))
            params = tuple(
                (v.lstrip("?"), c) for v, c in _parse_typed_list(body.get(":parameters", []))
            )
            pre_pos, pre_neg = _parse_conjunction(body.get(":precondition", ["and"]))
            if pre_neg:
                raise UnsupportedFeatureError("negative preconditions are not supported")
            adds, dels = _parse_conjunction(body.get(":effect", ["and"]))
            operators.append(
                Operator(
                    name=op_name,
                    params=params,
                    precondition=frozenset(pre_pos),
                    add=frozenset(adds),
                    delete=frozenset(dels),
                )
            )
        else:
            raise UnsupportedFeatureError(f"unsupported domain section {key}")
    domain = PlanningDomain(
        name=name, predicates=predicates, categories=categories, operators=tuple(operators)
    )

    ptree = _parse_sexp(_tokenize(problem_text))
    if ptree[0] != "define" or ptree[1][0] != "problem":
        raise PddlParseError("not a PDDL problem definition")
    pname = ptree[1][1]
    objects: dict[str, str] = {}
    init: frozenset[Fluent] = frozenset()
    goal: frozenset[Fluent] = frozenset()
    for section in ptree[2:]:
        key = section[0]
        if key == ":domain":
            continue
        if key == ":objects":
            objects = dict(_parse_typed_list(section[1:]))
        elif key == ":init":
            init = frozenset(_parse_atom(a) for a in section[1:])
        elif key == ":goal":
            pos, neg = _parse_conjunction(section[1])
            if neg:
                raise UnsupportedFeatureError("negative goals are not supported")
            goal = frozenset(pos)
        else:
            raise UnsupportedFeatureError(f"unsupported problem section {key}")
    return domain, PlanningProblem(name=pname, objects=objects, init=init, goal=goal)


# ---------------------------------------------------------------------------
# Data-file loaders
# ---------------------------------------------------------------------------


def load_templates(path: str | Path) -> dict[str, StateTemplate]:
    """Template file: `[Type]` blocks with `init:` / `goal:` atom lines."""
    templates: dict[str, StateTemplate] = {}
    task = None
    init: list[TemplateAtom] = []
    goal: list[TemplateAtom] = []

    def parse_atoms(text: str) -> list[TemplateAtom]:
        atoms = []
        for m in re.finditer(r"([\w-]+)\(([^)]*)\)", text):
            slots = tuple(s.strip() for s in m.group(2).split(",") if s.strip())
            atoms.append(TemplateAtom(m.group(1), slots))
        return atoms

    def flush():
        if task is not None:
            templates[task] = StateTemplate(task, tuple(init), tuple(goal))

    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            task, init, goal = line[1:-1], [], []
        elif line.startswith("init:"):
            init = parse_atoms(line[len("init:"):])
        elif line.startswith("goal:"):
            goal = parse_atoms(line[len("goal:"):])
        else:
            raise PlanningError(f"unrecognized template line {line!r}")
    flush()
    return templates


def load_functional_positions(path: str | Path) -> dict[str, tuple[int, ...]]:
    """Sidecar file: predicate<TAB>comma-separated functional position indices."""
    out: dict[str, tuple[int, ...]] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        predicate, spec = line.split("\t")
        out[predicate] = tuple(int(p) for p in spec.split(",") if p.strip())
    return out


def load_world(path: str | Path, functional: dict[str, tuple[int, ...]]) -> WorldModel:
    import json

    data = json.loads(Path(path).read_text())
    fluents = frozenset(Fluent(f["predicate"], tuple(f["args"])) for f in data["fluents"])
    world = WorldModel(fluents=fluents, functional_positions=functional, catalog=dict(data["catalog"]))
    for a, b in itertools.combinations(sorted(fluents, key=str), 2):
        if contradicts(a, b, world):
            raise PlanningError(f"world fluents {a} and {b} violate a functional declaration")
    return world
