"""Exception hierarchy shared across the engine.

Every error raised by the library derives from :class:`EduStoryError` so
callers (and the CLI exit-code mapping) can distinguish engine failures
from genuine bugs.
"""

from __future__ import annotations


class EduStoryError(Exception):
    """Base class for all engine errors."""


# --------------------------------------------------------------------------
# formula


class ParseError(EduStoryError):
    """Formula text could not be parsed.

    Carries the byte offset of the offending token and the set of token
    kinds that would have been accepted there.
    """

    def __init__(self, message: str, *, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class MultipleEquals(ParseError):
    """More than one top-level '=' in a formula."""


class DimensionError(EduStoryError):
    """Base class for dimensional-analysis failures."""


class UnknownSymbol(DimensionError):
    def __init__(self, symbol: str):
        self.symbol = symbol
        super().__init__(f"symbol {symbol!r} not present in dimension table")


class FractionalExponent(DimensionError):
    """Non-integer (or non-literal) exponent applied to a dimensioned base."""


class AdditionMismatch(DimensionError):
    """Operands of + or - carry different dimensions."""

    def __init__(self, op: str, lhs, rhs):
        self.op = op
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(f"operands of {op!r} differ in dimension: {lhs} vs {rhs}")


# --------------------------------------------------------------------------
# state machine


class PreconditionViolation(EduStoryError):
    """An action's precondition does not hold in the given state."""

    def __init__(self, action: str, condition: str, *, step: int | None = None):
        self.action = action
        self.condition = condition
        self.step = step
        where = f" (step {step})" if step is not None else ""
        super().__init__(f"{action}: {condition}{where}")


class DanglingRelation(EduStoryError):
    """A relation references an entity id that does not resolve."""


class NonMonotoneStates(EduStoryError):
    """An entity present in the earlier state is absent in the later one."""


# --------------------------------------------------------------------------
# planner


class PlanInvalid(EduStoryError):
    """Structural plan invariant violated (phase order, shot numbering, ...)."""


class ExpectedEntityMissing(EduStoryError):
    def __init__(self, shot_id: int, entity_id: str):
        self.shot_id = shot_id
        self.entity_id = entity_id
        super().__init__(
            f"shot {shot_id}: expected entity {entity_id!r} not present in simulated state"
        )


class SpecIncomplete(EduStoryError):
    """Lesson spec lacks the material needed to build a canonical plan."""


class BackendError(EduStoryError):
    """Transport or protocol failure talking to a remote backend."""


class InvalidPlanAfterRetries(EduStoryError):
    def __init__(self, attempt_errors: list[str]):
        self.attempt_errors = list(attempt_errors)
        super().__init__(
            "planner backend produced no valid plan after "
            f"{len(self.attempt_errors)} attempts: {self.attempt_errors}"
        )


# --------------------------------------------------------------------------
# verifier


class UnknownConstraintKind(EduStoryError):
    pass


class MissingDimensionTable(EduStoryError):
    pass


class MissingPlannedShot(EduStoryError):
    """A checker needing the planned-shot context was invoked without one."""


class MalformedJudgeResponse(EduStoryError):
    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(f"{message}; raw response: {raw!r}")


# --------------------------------------------------------------------------
# metrics


class TooFewShots(EduStoryError):
    pass


class NonConsecutiveShots(EduStoryError):
    pass


class PlanLengthMismatch(EduStoryError):
    pass


class EmptyCondition(EduStoryError):
    pass


# --------------------------------------------------------------------------
# benchmark harness


class ManifestNotFound(EduStoryError):
    pass


class SchemaViolation(EduStoryError):
    def __init__(self, clip_id: str, field_path: str, message: str):
        self.clip_id = clip_id
        self.field_path = field_path
        super().__init__(f"clip {clip_id!r}, field {field_path}: {message}")


class InconsistentPrefix(EduStoryError):
    pass


class InvalidConfig(EduStoryError):
    pass


# --------------------------------------------------------------------------
# cli


class ConfigError(EduStoryError):
    pass
