"""Exception hierarchy shared across the compiler and runtime."""

from __future__ import annotations

from dataclasses import dataclass, field


class TriStoreError(Exception):
    """Base class for every error raised by this package."""


# --- catalog ---------------------------------------------------------------

class CatalogError(TriStoreError):
    pass


class CatalogParseError(CatalogError):
    pass


class DuplicateAlias(CatalogError):
    pass


class UnknownModelKind(CatalogError):
    pass


class NegativeLatency(CatalogError):
    pass


class UnknownAlias(CatalogError):
    pass


class UnknownFunction(CatalogError):
    pass


class NoMatchingOverload(CatalogError):
    pass


class AmbiguousOverload(CatalogError):
    pass


# --- lexing / parsing ------------------------------------------------------

@dataclass
class Span:
    """Half-open [start, end) character range with 1-based line/col of start."""
    start: int
    end: int
    line: int
    col: int

    def covers(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


class LexError(TriStoreError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class UnterminatedString(LexError):
    pass


class IllegalCharacter(LexError):
    pass


class AdilSyntaxError(TriStoreError):
    """Parse failure; carries the expected-token set and the offending position."""

    def __init__(self, message: str, expected: tuple[str, ...], line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}"
                         + (f" (expected one of: {', '.join(expected)})" if expected else ""))
        self.expected = expected
        self.line = line
        self.col = col


# --- semantic validation ---------------------------------------------------

@dataclass
class Diagnostic:
    severity: str
    code: str
    statement_index: int
    span: Span | None
    message: str

    def to_json_dict(self) -> dict:
        span = None
        if self.span is not None:
            span = {"start": self.span.start, "end": self.span.end,
                    "line": self.span.line, "col": self.span.col}
        return {"severity": self.severity, "code": self.code,
                "statement_index": self.statement_index, "span": span,
                "message": self.message}


class SemanticError(TriStoreError):
    """Raised by validation; `code` matches the diagnostic code emitted to the CLI."""

    code = "SemanticError"

    def __init__(self, message: str, statement_index: int = -1, span: Span | None = None):
        super().__init__(message)
        self.statement_index = statement_index
        self.span = span

    def diagnostic(self) -> Diagnostic:
        return Diagnostic("error", self.code, self.statement_index, self.span, str(self))


class UnknownVariable(SemanticError):
    code = "UnknownVariable"


class UnknownEngineAlias(SemanticError):
    code = "UnknownEngineAlias"


class UnknownRelationOrColumn(SemanticError):
    code = "UnknownRelationOrColumn"


class AmbiguousColumn(SemanticError):
    code = "AmbiguousColumn"


class StarNotSupported(SemanticError):
    code = "StarNotSupported"


class TypeMismatch(SemanticError):
    code = "TypeMismatch"

    def __init__(self, expected, found, statement_index: int = -1, span: Span | None = None):
        super().__init__(f"expected {expected}, found {found}", statement_index, span)
        self.expected = expected
        self.found = found


class MissingSchemaAnnotation(SemanticError):
    code = "MissingSchemaAnnotation"


class NotACollection(SemanticError):
    code = "NotACollection"


class PredicateNotBoolean(SemanticError):
    code = "PredicateNotBoolean"


class ArityMismatch(SemanticError):
    code = "ArityMismatch"


# --- planning --------------------------------------------------------------

class PlanError(TriStoreError):
    pass


class NoTranslation(PlanError):
    """A logical operator kind has no physical pattern: a registry bug."""


class DomainError(TriStoreError):
    pass


# --- cost model ------------------------------------------------------------

class CostModelError(TriStoreError):
    pass


class MissingFeature(CostModelError):
    pass


class InsufficientSamples(CostModelError):
    pass


class SingularDesign(CostModelError):
    def __init__(self, operator: str, rank: int, needed: int):
        super().__init__(f"rank-deficient design for {operator}: rank {rank} < {needed} weights")
        self.operator = operator


class UnknownOperatorModel(CostModelError):
    pass


class MissingCostModel(CostModelError):
    pass


# --- engines ---------------------------------------------------------------

class EngineError(TriStoreError):
    pass


class UnsupportedSyntax(EngineError):
    pass


class UnknownLabelOrProperty(EngineError):
    pass


class UnknownField(EngineError):
    pass


class UnknownColumn(EngineError):
    pass


class IncompatibleModel(EngineError):
    pass


class SchemaMismatch(EngineError):
    pass


class EngineUnavailable(EngineError):
    pass


# --- analytics -------------------------------------------------------------

class AnalyticsError(TriStoreError):
    pass


class EmptyCorpus(AnalyticsError):
    pass


class InvalidK(AnalyticsError):
    pass


class EmptyGraph(AnalyticsError):
    pass


class MissingResource(AnalyticsError):
    pass


class IndexOutOfRange(AnalyticsError):
    pass


class UnknownKey(AnalyticsError):
    pass


class MissingKeyMap(AnalyticsError):
    pass


class Unimplemented(AnalyticsError):
    pass


# --- execution -------------------------------------------------------------

class ExecutionError(TriStoreError):
    """Runtime failure with plan-node provenance."""

    def __init__(self, message: str, node: str | None = None,
                 partition: int | None = None, batch: int | None = None):
        loc = []
        if node is not None:
            loc.append(f"node {node}")
        if partition is not None:
            loc.append(f"partition {partition}")
        if batch is not None:
            loc.append(f"batch {batch}")
        super().__init__(message + (f" [{', '.join(loc)}]" if loc else ""))
        self.node = node
        self.partition = partition
        self.batch = batch
