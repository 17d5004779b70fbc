"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RacError(Exception):
    """Base class for every error raised by raclab."""


class InvalidName(RacError, ValueError):
    pass


class ParseError(RacError):
    """Syntax error in a domain, problem, state or action text."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line else ""
        super().__init__(f"{message}{where}")


class ValidationError(RacError):
    """Well-formed input that references an unknown or ill-typed symbol."""

    def __init__(self, message: str, symbol: str | None = None):
        self.symbol = symbol
        super().__init__(message)


class UnknownSchema(ValidationError):
    pass


class ArityMismatch(ValidationError):
    pass


class TypeMismatch(ValidationError):
    pass


class MissingTemplate(RacError):
    pass


class NotApplicable(RacError):
    """Raised by apply_action when a precondition literal fails."""

    def __init__(self, action, unsatisfied):
        self.action = action
        self.unsatisfied = frozenset(unsatisfied)
        lits = " ".join(sorted(lit.canonical() for lit in self.unsatisfied))
        super().__init__(f"{action.canonical()} is not applicable: {lits}")


# reasoner gateway

class ReasonerError(RacError):
    pass


class ReplayMiss(ReasonerError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no recorded response for cache key {key}")


class CacheCollision(ReasonerError):
    pass


class MockUnparseablePrompt(ReasonerError):
    pass


# pipeline

class PipelineError(RacError):
    """Base for failures while running a method over an instance.

    Every exception leaving ``run_prorac``/``run_baseline`` carries a
    ``stage`` attribute naming where it happened.
    """

    stage: str | None = None


class ExtractionParseError(PipelineError):
    pass


class AnswerParseError(PipelineError):
    pass


class StateParseError(PipelineError):
    pass


# harness

class SchemaError(RacError):
    def __init__(self, message: str, record: int | None = None):
        self.record = record
        prefix = f"record {record}: " if record is not None else ""
        super().__init__(prefix + message)


class UnauditableInstance(RacError):
    pass


class IncomparableRun(RacError):
    pass
