"""Two-level hierarchical shot plans and the planners that produce them.

A plan maps a lesson onto the four canonical phases (Introduction,
Explanation, Application, Summary), each phase holding one or more
planned shots. Every planned shot carries the action that advances the
pedagogical state, the entities expected on screen afterwards, and the
constraint ids the verifier must enforce.

Two planners are provided: a deterministic template planner driven by a
structured lesson spec (the offline workhorse for tests and mock runs)
and a retrying client for an LLM backend that emits the plan as JSON.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Protocol, Sequence

from .errors import (
    BackendError,
    ExpectedEntityMissing,
    InvalidPlanAfterRetries,
    PlanInvalid,
    PreconditionViolation,
    SpecIncomplete,
)
from .formula import Dimension, parse_formula
from .jsonio import canonical_dumps
from .state import (
    Apply,
    Constraint,
    ConstraintKind,
    Derive,
    EntityKind,
    Introduce,
    KnowledgeEntity,
    PedagogicalAction,
    PedagogicalState,
    Relation,
    RelationLabel,
    Summarize,
    action_from_json,
    action_to_json,
    constraint_from_json,
    constraint_to_json,
    validate_trace,
)

PLAN_SCHEMA_VERSION = "edustory_plan_v1"
LESSON_SCHEMA_VERSION = "edustory_lesson_v1"


class PhaseName(str, Enum):
    INTRODUCTION = "Introduction"
    EXPLANATION = "Explanation"
    APPLICATION = "Application"
    SUMMARY = "Summary"


CANONICAL_PHASE_ORDER: tuple[PhaseName, ...] = (
    PhaseName.INTRODUCTION,
    PhaseName.EXPLANATION,
    PhaseName.APPLICATION,
    PhaseName.SUMMARY,
)


@dataclass(frozen=True)
class PlannedShot:
    shot_id: int  # 1-based, consecutive across the flattened plan
    phase: PhaseName
    action: PedagogicalAction
    expected_entities: tuple[str, ...] = ()
    constraint_ids: tuple[str, ...] = ()
    description: str = ""


@dataclass(frozen=True)
class ShotPlan:
    """Ordered phases, each with its planned shots, plus the video-wide
    constraint set."""

    lesson: str
    phases: tuple[tuple[PhaseName, tuple[PlannedShot, ...]], ...]
    constraints: tuple[Constraint, ...] = ()

    def shots(self) -> tuple[PlannedShot, ...]:
        return tuple(shot for _, shots in self.phases for shot in shots)

    def shot_counts(self) -> tuple[int, ...]:
        return tuple(len(shots) for _, shots in self.phases)

    def total_shots(self) -> int:
        return sum(self.shot_counts())

    def constraint_by_id(self, constraint_id: str) -> Constraint | None:
        for c in self.constraints:
            if c.id == constraint_id:
                return c
        return None


# --------------------------------------------------------------------------
# validation


def validate_plan(plan: ShotPlan) -> list[PedagogicalState]:
    """Structurally validate ``plan`` and simulate it from the empty state.

    Returns the full state trajectory [S_0 ... S_T]. Raises
    :class:`PlanInvalid` for structural breaches, re-raises the first
    :class:`PreconditionViolation` with the offending shot id, and raises
    :class:`ExpectedEntityMissing` when a shot expects an entity its
    post-state does not contain.
    """
    phase_names = tuple(name for name, _ in plan.phases)
    if phase_names != CANONICAL_PHASE_ORDER:
        raise PlanInvalid(
            f"phases must be exactly {[p.value for p in CANONICAL_PHASE_ORDER]} "
            f"in order, got {[p.value for p in phase_names]}"
        )
    for name, shots in plan.phases:
        if not shots:
            raise PlanInvalid(f"phase {name.value!r} has no shots")
        for shot in shots:
            if shot.phase != name:
                raise PlanInvalid(
                    f"shot {shot.shot_id} tagged {shot.phase.value!r} "
                    f"but listed under {name.value!r}"
                )

    flattened = plan.shots()
    for position, shot in enumerate(flattened, start=1):
        if shot.shot_id != position:
            raise PlanInvalid(
                f"shot ids must be consecutive from 1; "
                f"position {position} has shot_id {shot.shot_id}"
            )
        for cid in shot.constraint_ids:
            if plan.constraint_by_id(cid) is None:
                raise PlanInvalid(
                    f"shot {shot.shot_id} references unknown constraint {cid!r}"
                )

    initial = PedagogicalState.initial(plan.constraints)
    try:
        trajectory = validate_trace(initial, [s.action for s in flattened])
    except PreconditionViolation as exc:
        shot_id = (exc.step or 0) + 1
        raise PreconditionViolation(exc.action, exc.condition, step=shot_id) from None

    for shot, post in zip(flattened, trajectory[1:]):
        available = post.known_ids()
        for entity_id in shot.expected_entities:
            if entity_id not in available:
                raise ExpectedEntityMissing(shot.shot_id, entity_id)
    return trajectory


# --------------------------------------------------------------------------
# plan JSON


def plan_to_json(plan: ShotPlan) -> dict[str, Any]:
    return {
        "schema_version": PLAN_SCHEMA_VERSION,
        "lesson": plan.lesson,
        "phases": [
            {
                "name": name.value,
                "shots": [
                    {
                        "shot_id": s.shot_id,
                        "phase": s.phase.value,
                        "action": action_to_json(s.action),
                        "expected_entities": list(s.expected_entities),
                        "constraint_ids": list(s.constraint_ids),
                        "description": s.description,
                    }
                    for s in shots
                ],
            }
            for name, shots in plan.phases
        ],
        "constraints": [constraint_to_json(c) for c in plan.constraints],
    }


def plan_from_json(doc: Mapping[str, Any]) -> ShotPlan:
    try:
        phases = tuple(
            (
                PhaseName(phase_doc["name"]),
                tuple(
                    PlannedShot(
                        shot_id=int(shot_doc["shot_id"]),
                        phase=PhaseName(shot_doc["phase"]),
                        action=action_from_json(shot_doc["action"]),
                        expected_entities=tuple(shot_doc.get("expected_entities", [])),
                        constraint_ids=tuple(shot_doc.get("constraint_ids", [])),
                        description=shot_doc.get("description", ""),
                    )
                    for shot_doc in phase_doc.get("shots", [])
                ),
            )
            for phase_doc in doc.get("phases", [])
        )
        return ShotPlan(
            lesson=doc.get("lesson", ""),
            phases=phases,
            constraints=tuple(constraint_from_json(c) for c in doc.get("constraints", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PlanInvalid(f"malformed plan document: {exc}") from exc


# --------------------------------------------------------------------------
# structured lesson specs and the template planner


@dataclass(frozen=True)
class ConceptSpec:
    id: str
    label: str = ""
    kind: EntityKind = EntityKind.CONCEPT
    unit: Dimension | None = None
    relates_to: tuple[tuple[str, RelationLabel], ...] = ()


@dataclass(frozen=True)
class FormulaSpec:
    id: str
    expression: str
    derived_from: str
    label: str = ""
    relation: RelationLabel = RelationLabel.DERIVES


@dataclass(frozen=True)
class ExampleSpec:
    id: str
    applies_to: str
    label: str = ""


@dataclass(frozen=True)
class LessonSpec:
    """Structured lesson description consumed by the template planner."""

    topic: str
    concepts: tuple[ConceptSpec, ...]
    formulas: tuple[FormulaSpec, ...]
    example: ExampleSpec | None = None
    constraints: tuple[Constraint, ...] = ()
    dimension_table: Mapping[str, Sequence[int]] | None = None


def lesson_spec_from_json(doc: Mapping[str, Any]) -> LessonSpec:
    concepts = tuple(
        ConceptSpec(
            id=c["id"],
            label=c.get("label", c["id"]),
            kind=EntityKind(c.get("kind", "concept")),
            unit=Dimension(tuple(int(x) for x in c["unit"])) if c.get("unit") else None,
            relates_to=tuple(
                (r["target"], RelationLabel(r["label"])) for r in c.get("relates_to", [])
            ),
        )
        for c in doc.get("concepts", [])
    )
    formulas = tuple(
        FormulaSpec(
            id=f["id"],
            expression=f["expression"],
            derived_from=f["derived_from"],
            label=f.get("label", f["expression"]),
            relation=RelationLabel(f.get("relation", "derives")),
        )
        for f in doc.get("formulas", [])
    )
    example_doc = doc.get("example")
    example = (
        ExampleSpec(
            id=example_doc["id"],
            applies_to=example_doc["applies_to"],
            label=example_doc.get("label", example_doc["id"]),
        )
        if example_doc
        else None
    )
    return LessonSpec(
        topic=doc.get("topic", ""),
        concepts=concepts,
        formulas=formulas,
        example=example,
        constraints=tuple(constraint_from_json(c) for c in doc.get("constraints", [])),
        dimension_table=doc.get("dimension_table"),
    )


def default_constraints(spec: LessonSpec) -> tuple[Constraint, ...]:
    """Standard constraint set when a spec declares none: the three
    structural checks, plus dimension checks when a table is given."""
    constraints = [
        Constraint("c_entities", ConstraintKind.ENTITY_CONTINUITY),
        Constraint("c_formulas", ConstraintKind.FORMULA_IDENTITY),
        Constraint("c_order", ConstraintKind.LOGICAL_ORDERING),
    ]
    if spec.dimension_table:
        table = {k: list(v) for k, v in spec.dimension_table.items()}
        constraints.append(
            Constraint("c_balance", ConstraintKind.EQUATION_BALANCE, {"dimension_table": table})
        )
        constraints.append(
            Constraint("c_units", ConstraintKind.UNIT_CONSISTENCY, {"dimension_table": table})
        )
    return tuple(constraints)


def template_plan(spec: LessonSpec) -> ShotPlan:
    """Deterministic canonical plan for a structured lesson spec.

    One introduce per concept, one derive per formula, one apply for the
    worked example, one summarize over every knowledge entity. Expected
    entities accumulate: each shot expects everything established so far
    (the continuation discipline the verifier enforces).
    """
    if not spec.concepts:
        raise SpecIncomplete("lesson spec names no concepts")
    if not spec.formulas:
        raise SpecIncomplete("lesson spec names no derivable formulas")
    if spec.example is None:
        raise SpecIncomplete("lesson spec names no worked example")

    constraints = spec.constraints or default_constraints(spec)
    constraint_ids = tuple(c.id for c in constraints)

    shots: list[tuple[PhaseName, PlannedShot]] = []
    established: list[str] = []
    shot_id = 0

    def add_shot(phase: PhaseName, action: PedagogicalAction, expected: Sequence[str], text: str):
        nonlocal shot_id
        shot_id += 1
        shots.append(
            (
                phase,
                PlannedShot(
                    shot_id=shot_id,
                    phase=phase,
                    action=action,
                    expected_entities=tuple(expected),
                    constraint_ids=constraint_ids,
                    description=text,
                ),
            )
        )

    concept_ids = {c.id for c in spec.concepts}
    for concept in spec.concepts:
        entity = KnowledgeEntity(concept.id, concept.kind, concept.label, unit=concept.unit)
        incident = tuple(
            Relation(concept.id, target, label)
            for target, label in concept.relates_to
            if target in set(established) | concept_ids
        )
        established.append(concept.id)
        add_shot(
            PhaseName.INTRODUCTION,
            Introduce(entity, incident),
            established,
            f"Introduce {concept.label or concept.id}",
        )

    for formula_spec in spec.formulas:
        entity = KnowledgeEntity(
            formula_spec.id,
            EntityKind.FORMULA,
            formula_spec.label,
            formula=parse_formula(formula_spec.expression),
        )
        established.append(formula_spec.id)
        add_shot(
            PhaseName.EXPLANATION,
            Derive(formula_spec.derived_from, entity, formula_spec.relation),
            established,
            f"Derive {formula_spec.expression} from {formula_spec.derived_from}",
        )

    instance = KnowledgeEntity(
        spec.example.id, EntityKind.EXAMPLE_INSTANCE, spec.example.label
    )
    add_shot(
        PhaseName.APPLICATION,
        Apply(spec.example.applies_to, instance),
        established + [spec.example.id],
        f"Apply {spec.example.applies_to} to {spec.example.label or spec.example.id}",
    )

    add_shot(
        PhaseName.SUMMARY,
        Summarize(frozenset(established)),
        established + [spec.example.id],
        f"Summarize {spec.topic}",
    )

    phases = tuple(
        (name, tuple(shot for phase, shot in shots if phase == name))
        for name in CANONICAL_PHASE_ORDER
    )
    return ShotPlan(lesson=spec.topic, phases=phases, constraints=constraints)


# --------------------------------------------------------------------------
# LLM-backed planner


class PlannerBackend(Protocol):
    """Wire contract: one prompt string in, one text completion out."""

    def complete(self, prompt: str) -> str: ...


_PLANNER_PROMPT = """You are an instructional video planner. Convert the lesson below into a
structured shot plan as a single JSON object, with no surrounding text.

The JSON object must have fields:
  lesson: string
  phases: array of {{name, shots}}, with names exactly
    ["Introduction", "Explanation", "Application", "Summary"] in order,
    each holding at least one shot
  phases[].shots[]: {{shot_id, phase, action, expected_entities,
    constraint_ids, description}} with shot_id consecutive from 1
  constraints: array of {{id, kind, params}}

Each action is one of:
  {{"type": "introduce", "entity": {{id,kind,label}}, "incident_relations": []}}
  {{"type": "derive", "source_id", "new_entity": {{id,kind,label,formula}}, "label"}}
  {{"type": "apply", "entity_id", "instance": {{id,kind,label}}}}
  {{"type": "summarize", "entity_ids": []}}

Every entity referenced by an action must have been introduced by an
earlier shot. Expected entities accumulate shot over shot.

Lesson:
{lesson}
"""


@dataclass(frozen=True)
class LlmPlanResult:
    plan: ShotPlan
    attempts: int
    attempt_errors: tuple[str, ...] = ()


def llm_plan(lesson: str, client: PlannerBackend, *, max_attempts: int = 3) -> LlmPlanResult:
    """Ask ``client`` for a plan, validating and re-prompting on failure.

    Each failed attempt appends the validation error to the next prompt.
    After ``max_attempts`` failures, :class:`InvalidPlanAfterRetries` is
    raised carrying every attempt's error.
    """
    import json as _json

    base_prompt = _PLANNER_PROMPT.format(lesson=lesson)
    errors: list[str] = []
    prompt = base_prompt
    for attempt in range(1, max_attempts + 1):
        try:
            text = client.complete(prompt)
        except BackendError:
            raise
        try:
            doc = _json.loads(text)
            plan = plan_from_json(doc)
            validate_plan(plan)
            return LlmPlanResult(plan=plan, attempts=attempt, attempt_errors=tuple(errors))
        except Exception as exc:  # noqa: BLE001 - every failure feeds the re-prompt
            errors.append(f"attempt {attempt}: {exc}")
            prompt = (
                base_prompt
                + "\n\nYour previous answer was rejected: "
                + str(exc)
                + "\nReturn corrected JSON only."
            )
    raise InvalidPlanAfterRetries(errors)


def plan_digest(plan: ShotPlan) -> str:
    """Stable digest input for seeding; canonical JSON of the plan."""
    return canonical_dumps(plan_to_json(plan))
