"""Exception hierarchy shared by every module."""


class GBPathError(ValueError):
    """Base class for input/validation problems (CLI exit code 2)."""


class OutOfRangeEdges(GBPathError):
    pass


class TooFewVertices(GBPathError):
    pass


class InvalidInput(GBPathError):
    pass


class UnrandomizedMatrix(GBPathError):
    pass


class EmptyCandidates(GBPathError):
    pass


class NonPositiveSensitivity(GBPathError):
    pass


class InvalidBudget(GBPathError):
    pass


class DomainViolation(GBPathError):
    pass


class BadRelationValue(GBPathError):
    pass


class TooFewEdges(GBPathError):
    pass


class CyclicPath(GBPathError):
    pass


class InstanceTooLarge(GBPathError):
    pass


class UnknownEdge(GBPathError):
    pass


class InconsistentView(GBPathError):
    pass


class ConfigError(GBPathError):
    pass


class FormatError(GBPathError):
    pass


class UnusableMap(GBPathError):
    """Insertion exhausted every layer assignment and splitting is disabled."""


class InternalNontermination(RuntimeError):
    """The insertion search exceeded its transition cap (a defect, not an input error)."""
