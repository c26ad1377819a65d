"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class IFCTError(Exception):
    """Base class for every domain error raised by the package."""


# volume / geometry
class FormatError(IFCTError):
    pass


class IoError(IFCTError, OSError):
    pass


class DimensionMismatch(IFCTError, ValueError):
    pass


class EmptyMask(IFCTError, ValueError):
    pass


# labeler
class ZeroVector(IFCTError, ValueError):
    pass


class EmptyLabelSet(IFCTError, ValueError):
    pass


class ProviderError(IFCTError):
    pass


# guideline
class SchemaError(IFCTError):
    pass


class GraphError(IFCTError):
    pass


class PredicateError(IFCTError):
    pass


class PathMismatch(IFCTError):
    pass


# planner
class UnresolvableProducer(IFCTError):
    def __init__(self, attr: str, function: str | None = None):
        self.attr = attr
        self.function = function
        super().__init__(f"no registered producer {function!r} for attribute {attr!r}")


class Unrepairable(IFCTError):
    def __init__(self, issue):
        self.issue = issue
        super().__init__(f"cannot repair issue: {issue}")


class MaxIterationsExceeded(IFCTError):
    def __init__(self, report, iterations: int):
        self.report = report
        self.iterations = iterations
        super().__init__(f"plan still invalid after {iterations} iteration(s): {report.summary()}")


class ValidationFailed(IFCTError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"plan rejected: {report.summary()}")


# executor
class MissingAttribute(IFCTError, KeyError):
    def __init__(self, attr: str, node_id: str | None = None):
        self.attr = attr
        self.node_id = node_id
        where = f" at node {node_id!r}" if node_id else ""
        super().__init__(f"attribute {attr!r} missing{where}")

    def __str__(self) -> str:
        return self.args[0]


class UnitMismatch(IFCTError, ValueError):
    pass


class TypeMismatch(IFCTError, TypeError):
    pass


class NoLesionLeafUndefined(IFCTError):
    pass


# bench
class SpecError(IFCTError, ValueError):
    pass


class NoConsistentPath(IFCTError):
    pass


class LengthMismatch(IFCTError, ValueError):
    pass


class EmptyInput(IFCTError, ValueError):
    pass
