"""Exception hierarchy shared by every module."""


class DynariskError(Exception):
    """Base class for all library errors."""


# filtration
class NonTreeShape(DynariskError):
    pass


class ProbNotNormalized(DynariskError):
    pass


class ZeroProbabilityNode(DynariskError):
    pass


class AnchorMismatch(DynariskError):
    pass


class EnumerationCapExceeded(DynariskError):
    pass


class InvalidStoppingTime(DynariskError):
    pass


# processes
class WindowOrderViolation(DynariskError):
    pass


class TreeMismatch(DynariskError):
    pass


# composition
class NotAntichainSubset(DynariskError):
    pass


class NotADensity(DynariskError):
    pass


class BadWeights(DynariskError):
    pass


class SubsetEnumerationCapExceeded(DynariskError):
    pass


# functionals
class WindowViolation(DynariskError):
    pass


class EmptyScenarioSet(DynariskError):
    pass


class NonPositiveDensity(DynariskError):
    pass


class NormalizationViolation(DynariskError):
    pass


class BaseNotOneStepConsistent(DynariskError):
    pass


# optim
class LPFailure(DynariskError):
    pass


class DimensionMismatch(DynariskError):
    pass


# consistency
class NotAccepted(DynariskError):
    pass


class InputNotConsistent(DynariskError):
    pass


class HorizonMismatch(DynariskError):
    pass


# cli
class FixtureParseError(DynariskError):
    pass


class UsageError(DynariskError):
    pass
