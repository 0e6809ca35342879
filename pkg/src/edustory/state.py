"""Pedagogical state, actions, and the deterministic transition function.

A state is the accumulated knowledge after some number of shots: the
entity set, a typed relation graph over those entities, and the
constraint list that stays invariant for the whole video. Four actions
(introduce / derive / apply / summarize) are the only legal transitions;
each either grows the state monotonically or leaves it untouched.

Example instances added by ``apply`` live in a separate registry with a
parallel instantiation-edge set, keeping the relation graph strictly
over knowledge entities while still recording the worked example.

States and actions are immutable values: transitions return new states,
which makes determinism, monotonicity, and delta computation directly
testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import (
    DanglingRelation,
    NonMonotoneStates,
    PreconditionViolation,
)
from .formula import Dimension, Formula, parse_formula

STATE_SCHEMA_VERSION = "edustory_state_v1"


class EntityKind(str, Enum):
    CONCEPT = "concept"
    QUANTITY = "quantity"
    FORMULA = "formula"
    EXAMPLE_INSTANCE = "example-instance"


class RelationLabel(str, Enum):
    CAUSES = "causes"
    QUANTIFIES = "quantifies"
    DERIVES = "derives"
    INSTANTIATES = "instantiates"


class ConstraintKind(str, Enum):
    EQUATION_BALANCE = "equation_balance"
    UNIT_CONSISTENCY = "unit_consistency"
    DIRECTIONAL_CONVENTION = "directional_convention"
    ENTITY_CONTINUITY = "entity_continuity"
    FORMULA_IDENTITY = "formula_identity"
    LOGICAL_ORDERING = "logical_ordering"
    CUSTOM = "custom"


@dataclass(frozen=True)
class KnowledgeEntity:
    """A concept, quantity, formula, or worked-example instance.

    Identity is the ``id`` string; labels are display text and may
    repeat. A formula entity must carry its parsed formula; a quantity
    must carry its dimension vector.
    """

    id: str
    kind: EntityKind
    label: str = ""
    formula: Formula | None = None
    unit: Dimension | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("entity id must be nonempty")
        if (self.kind == EntityKind.FORMULA) != (self.formula is not None):
            raise ValueError(
                f"entity {self.id!r}: formula field present iff kind is 'formula'"
            )
        if (self.kind == EntityKind.QUANTITY) != (self.unit is not None):
            raise ValueError(
                f"entity {self.id!r}: unit field present iff kind is 'quantity'"
            )


@dataclass(frozen=True)
class Relation:
    """Directed typed edge between two entity ids."""

    source: str
    target: str
    label: RelationLabel

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError(f"relation {self.source!r} -> itself is not allowed")


@dataclass(frozen=True, eq=True)
class Constraint:
    """A checkable predicate: the kind selects a checker, params feed it."""

    id: str
    kind: ConstraintKind
    params: Mapping[str, Any] = field(default_factory=dict)

    # params is a plain dict; constraints are compared, never hashed
    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class PedagogicalState:
    """Knowledge accumulated through shot ``shot_index``.

    ``entities`` is kept sorted by id so structurally equal states
    compare equal regardless of construction order. ``last_action``
    records the kind of the transition that produced this state (None
    for an initial state); deltas use it to tell a recap from other
    no-growth transitions.
    """

    entities: tuple[KnowledgeEntity, ...] = ()
    relations: frozenset[Relation] = frozenset()
    constraints: tuple[Constraint, ...] = ()
    shot_index: int = 0
    examples: tuple[KnowledgeEntity, ...] = ()
    instantiations: frozenset[tuple[str, str]] = frozenset()
    last_action: str | None = None

    @classmethod
    def initial(cls, constraints: Iterable[Constraint] = ()) -> "PedagogicalState":
        return cls(constraints=tuple(constraints))

    # -- lookups ------------------------------------------------------

    def entity_ids(self) -> frozenset[str]:
        return frozenset(e.id for e in self.entities)

    def example_ids(self) -> frozenset[str]:
        return frozenset(e.id for e in self.examples)

    def known_ids(self) -> frozenset[str]:
        """Entity ids plus example-registry ids."""
        return self.entity_ids() | self.example_ids()

    def get_entity(self, entity_id: str) -> KnowledgeEntity | None:
        for e in self.entities:
            if e.id == entity_id:
                return e
        return None

    def formula_entities(self) -> tuple[KnowledgeEntity, ...]:
        return tuple(e for e in self.entities if e.kind == EntityKind.FORMULA)

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on breach."""
        ids = [e.id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate entity ids")
        if set(ids) & self.example_ids():
            raise ValueError("entity ids collide with example-registry ids")
        known = set(ids)
        for rel in self.relations:
            if rel.source not in known or rel.target not in known:
                raise ValueError(
                    f"relation ({rel.source!r}, {rel.target!r}) has a dangling endpoint"
                )
        for entity_id, instance_id in self.instantiations:
            if entity_id not in known or instance_id not in self.example_ids():
                raise ValueError(
                    f"instantiation ({entity_id!r}, {instance_id!r}) does not resolve"
                )


# --------------------------------------------------------------------------
# actions


class PedagogicalAction:
    """Base tag for the closed four-variant action set."""

    kind: str = ""


@dataclass(frozen=True)
class Introduce(PedagogicalAction):
    entity: KnowledgeEntity
    incident_relations: tuple[Relation, ...] = ()
    kind = "introduce"


@dataclass(frozen=True)
class Derive(PedagogicalAction):
    source_id: str
    new_entity: KnowledgeEntity
    label: RelationLabel
    kind = "derive"


@dataclass(frozen=True)
class Apply(PedagogicalAction):
    entity_id: str
    instance: KnowledgeEntity
    kind = "apply"


@dataclass(frozen=True)
class Summarize(PedagogicalAction):
    entity_ids: frozenset[str]
    kind = "summarize"


@dataclass(frozen=True)
class StateDelta:
    added_entities: frozenset[str]
    added_relations: frozenset[Relation]
    recap_triggered: bool = False


# --------------------------------------------------------------------------
# transition function


def action_added_ids(action: PedagogicalAction) -> tuple[str, ...]:
    """Ids the action contributes to the state (entities or registry)."""
    if isinstance(action, Introduce):
        return (action.entity.id,)
    if isinstance(action, Derive):
        return (action.new_entity.id,)
    if isinstance(action, Apply):
        return (action.instance.id,)
    return ()


def missing_prerequisites(state: PedagogicalState, action: PedagogicalAction) -> tuple[str, ...]:
    """Presence prerequisites of ``action`` not satisfied by ``state``.

    Returns the ids the action references that are not established
    (entities or examples). Absence-style preconditions (fresh ids) are
    deliberately excluded: this is the "was it introduced before use"
    question asked when auditing a realized shot, where the action's own
    additions are already in the state.
    """
    known = state.known_ids()
    missing: list[str] = []
    if isinstance(action, Introduce):
        allowed = known | {action.entity.id}
        for rel in action.incident_relations:
            for endpoint in (rel.source, rel.target):
                if endpoint not in allowed and endpoint not in missing:
                    missing.append(endpoint)
    elif isinstance(action, Derive):
        if action.source_id not in known:
            missing.append(action.source_id)
    elif isinstance(action, Apply):
        if action.entity_id not in known:
            missing.append(action.entity_id)
    elif isinstance(action, Summarize):
        missing.extend(sorted(set(action.entity_ids) - known))
    return tuple(missing)


def _sorted_entities(entities: Iterable[KnowledgeEntity]) -> tuple[KnowledgeEntity, ...]:
    return tuple(sorted(entities, key=lambda e: e.id))


def apply_action(state: PedagogicalState, action: PedagogicalAction) -> PedagogicalState:
    """Deterministic transition: returns the successor state.

    Effects by variant:

    * introduce — entity added, supplied incident relations added
    * derive    — new entity added plus one (source, new, label) relation
    * apply     — entity set unchanged; instance recorded in the example
      registry with one instantiation edge
    * summarize — entities and relations unchanged (recap shot)

    The shot index always advances by one and the constraint list is
    carried over verbatim. The input state is never mutated.
    """
    known = state.known_ids()
    entity_ids = state.entity_ids()

    if isinstance(action, Introduce):
        if action.entity.id in known:
            raise PreconditionViolation(
                "introduce", f"entity id {action.entity.id!r} already present"
            )
        allowed = entity_ids | {action.entity.id}
        for rel in action.incident_relations:
            for endpoint in (rel.source, rel.target):
                if endpoint not in allowed:
                    raise DanglingRelation(
                        f"introduce {action.entity.id!r}: incident relation references "
                        f"unknown id {endpoint!r}"
                    )
        return replace(
            state,
            entities=_sorted_entities(state.entities + (action.entity,)),
            relations=state.relations | set(action.incident_relations),
            shot_index=state.shot_index + 1,
            last_action=action.kind,
        )

    if isinstance(action, Derive):
        if action.source_id not in entity_ids:
            raise PreconditionViolation(
                "derive", f"source entity {action.source_id!r} not present"
            )
        if action.new_entity.id in known:
            raise PreconditionViolation(
                "derive", f"entity id {action.new_entity.id!r} already present"
            )
        new_relation = Relation(action.source_id, action.new_entity.id, action.label)
        return replace(
            state,
            entities=_sorted_entities(state.entities + (action.new_entity,)),
            relations=state.relations | {new_relation},
            shot_index=state.shot_index + 1,
            last_action=action.kind,
        )

    if isinstance(action, Apply):
        if action.entity_id not in entity_ids:
            raise PreconditionViolation(
                "apply", f"entity {action.entity_id!r} not present"
            )
        if action.instance.kind != EntityKind.EXAMPLE_INSTANCE:
            raise PreconditionViolation(
                "apply", f"instance {action.instance.id!r} must have kind 'example-instance'"
            )
        if action.instance.id in known:
            raise PreconditionViolation(
                "apply", f"instance id {action.instance.id!r} already present"
            )
        return replace(
            state,
            examples=_sorted_entities(state.examples + (action.instance,)),
            instantiations=state.instantiations | {(action.entity_id, action.instance.id)},
            shot_index=state.shot_index + 1,
            last_action=action.kind,
        )

    if isinstance(action, Summarize):
        stray = set(action.entity_ids) - entity_ids
        if stray:
            raise PreconditionViolation(
                "summarize", f"entity ids not present: {sorted(stray)}"
            )
        return replace(state, shot_index=state.shot_index + 1, last_action=action.kind)

    raise PreconditionViolation(
        getattr(action, "kind", type(action).__name__), "unknown action variant"
    )


def state_delta(before: PedagogicalState, after: PedagogicalState) -> StateDelta:
    """Exact set differences between two consecutive states.

    ``recap_triggered`` is true iff nothing was added and the transition
    was a summarize.
    """
    if before.shot_index + 1 != after.shot_index:
        raise PreconditionViolation(
            "state_delta",
            f"states are not consecutive: {before.shot_index} -> {after.shot_index}",
        )
    lost = before.entity_ids() - after.entity_ids()
    if lost:
        raise NonMonotoneStates(
            f"entities present before but absent after: {sorted(lost)}"
        )
    added_entities = after.entity_ids() - before.entity_ids()
    added_relations = after.relations - before.relations
    recap = (
        not added_entities
        and not added_relations
        and after.last_action == Summarize.kind
    )
    return StateDelta(
        added_entities=frozenset(added_entities),
        added_relations=frozenset(added_relations),
        recap_triggered=recap,
    )


def validate_trace(
    initial: PedagogicalState, actions: Iterable[PedagogicalAction]
) -> list[PedagogicalState]:
    """Fold ``apply_action`` over ``actions``; returns [S_0 ... S_T].

    The first failing precondition is re-raised with the offending step
    index attached.
    """
    trajectory = [initial]
    for step, action in enumerate(actions):
        try:
            trajectory.append(apply_action(trajectory[-1], action))
        except PreconditionViolation as exc:
            raise PreconditionViolation(exc.action, exc.condition, step=step) from None
    return trajectory


# --------------------------------------------------------------------------
# canonical JSON


def _entity_to_json(e: KnowledgeEntity) -> dict[str, Any]:
    doc: dict[str, Any] = {"id": e.id, "kind": e.kind.value, "label": e.label}
    if e.formula is not None:
        doc["formula"] = e.formula.source
    if e.unit is not None:
        doc["unit"] = list(e.unit.exponents)
    return doc


def _entity_from_json(doc: Mapping[str, Any]) -> KnowledgeEntity:
    return KnowledgeEntity(
        id=doc["id"],
        kind=EntityKind(doc["kind"]),
        label=doc.get("label", ""),
        formula=parse_formula(doc["formula"]) if "formula" in doc else None,
        unit=Dimension(tuple(int(x) for x in doc["unit"])) if "unit" in doc else None,
    )


def _relation_to_json(r: Relation) -> dict[str, str]:
    return {"source": r.source, "target": r.target, "label": r.label.value}


def _relation_from_json(doc: Mapping[str, Any]) -> Relation:
    return Relation(doc["source"], doc["target"], RelationLabel(doc["label"]))


def _sorted_relation_docs(relations: Iterable[Relation]) -> list[dict[str, str]]:
    return [
        _relation_to_json(r)
        for r in sorted(relations, key=lambda r: (r.source, r.target, r.label.value))
    ]


def constraint_to_json(c: Constraint) -> dict[str, Any]:
    return {"id": c.id, "kind": c.kind.value, "params": dict(c.params)}


def constraint_from_json(doc: Mapping[str, Any]) -> Constraint:
    return Constraint(doc["id"], ConstraintKind(doc["kind"]), dict(doc.get("params", {})))


def state_to_json(state: PedagogicalState) -> dict[str, Any]:
    return {
        "schema_version": STATE_SCHEMA_VERSION,
        "shot_index": state.shot_index,
        "entities": [_entity_to_json(e) for e in state.entities],
        "relations": _sorted_relation_docs(state.relations),
        "constraints": [constraint_to_json(c) for c in state.constraints],
        "examples": [_entity_to_json(e) for e in state.examples],
        "instantiations": sorted([a, b] for a, b in state.instantiations),
        "last_action": state.last_action,
    }


def state_from_json(doc: Mapping[str, Any]) -> PedagogicalState:
    state = PedagogicalState(
        entities=_sorted_entities(_entity_from_json(e) for e in doc.get("entities", [])),
        relations=frozenset(_relation_from_json(r) for r in doc.get("relations", [])),
        constraints=tuple(constraint_from_json(c) for c in doc.get("constraints", [])),
        shot_index=int(doc.get("shot_index", 0)),
        examples=_sorted_entities(_entity_from_json(e) for e in doc.get("examples", [])),
        instantiations=frozenset(
            (a, b) for a, b in doc.get("instantiations", [])
        ),
        last_action=doc.get("last_action"),
    )
    state.validate()
    return state


def action_to_json(action: PedagogicalAction) -> dict[str, Any]:
    if isinstance(action, Introduce):
        return {
            "type": action.kind,
            "entity": _entity_to_json(action.entity),
            "incident_relations": _sorted_relation_docs(action.incident_relations),
        }
    if isinstance(action, Derive):
        return {
            "type": action.kind,
            "source_id": action.source_id,
            "new_entity": _entity_to_json(action.new_entity),
            "label": action.label.value,
        }
    if isinstance(action, Apply):
        return {
            "type": action.kind,
            "entity_id": action.entity_id,
            "instance": _entity_to_json(action.instance),
        }
    if isinstance(action, Summarize):
        return {"type": action.kind, "entity_ids": sorted(action.entity_ids)}
    raise TypeError(f"not an action: {action!r}")


def action_from_json(doc: Mapping[str, Any]) -> PedagogicalAction:
    action_type = doc.get("type")
    if action_type == Introduce.kind:
        return Introduce(
            entity=_entity_from_json(doc["entity"]),
            incident_relations=tuple(
                _relation_from_json(r) for r in doc.get("incident_relations", [])
            ),
        )
    if action_type == Derive.kind:
        return Derive(
            source_id=doc["source_id"],
            new_entity=_entity_from_json(doc["new_entity"]),
            label=RelationLabel(doc["label"]),
        )
    if action_type == Apply.kind:
        return Apply(entity_id=doc["entity_id"], instance=_entity_from_json(doc["instance"]))
    if action_type == Summarize.kind:
        return Summarize(entity_ids=frozenset(doc["entity_ids"]))
    raise ValueError(f"unknown action type: {action_type!r}")


def delta_to_json(delta: StateDelta) -> dict[str, Any]:
    return {
        "added_entities": sorted(delta.added_entities),
        "added_relations": _sorted_relation_docs(delta.added_relations),
        "recap_triggered": delta.recap_triggered,
    }


def delta_from_json(doc: Mapping[str, Any]) -> StateDelta:
    return StateDelta(
        added_entities=frozenset(doc.get("added_entities", [])),
        added_relations=frozenset(
            _relation_from_json(r) for r in doc.get("added_relations", [])
        ),
        recap_triggered=bool(doc.get("recap_triggered", False)),
    )
