"""Exception hierarchy shared by every module of the package."""


class ScenredError(Exception):
    """Base class for all errors raised by scenred."""


class DimensionMismatch(ScenredError, ValueError):
    pass


class NegativeWeight(ScenredError, ValueError):
    pass


class WeightSumOutOfRange(ScenredError, ValueError):
    pass


class DuplicateAtom(ScenredError, ValueError):
    pass


class ShapeMismatch(ScenredError, ValueError):
    pass


class InvalidOrder(ScenredError, ValueError):
    pass


class LipschitzViolation(ScenredError, ValueError):
    pass


class CyclingGuardExceeded(ScenredError, RuntimeError):
    """Simplex hit its iteration cap; signals numerical trouble."""


class DualInfeasible(ScenredError, ValueError):
    pass


class EnumerationTooLarge(ScenredError, ValueError):
    pass


class InfeasibleRecourse(ScenredError, RuntimeError):
    """Second stage has no feasible point: the instance breaks relatively complete recourse."""


class TooManySubsets(ScenredError, ValueError):
    pass


class CertificateMissing(ScenredError, ValueError):
    pass


class SupportMismatch(ScenredError, ValueError):
    pass


class NotSymmetric(ScenredError, ValueError):
    pass


class ParseError(ScenredError, ValueError):
    """Instance file could not be parsed or failed schema validation."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
