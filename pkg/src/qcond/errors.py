"""Exception types raised across the package.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented exit statuses without a lookup table.
"""


class QcondError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class ConfigParseError(QcondError):
    exit_code = 2


class QuadratureNotConverged(QcondError):
    exit_code = 3


# degenerate or malformed numerical input, exit status 4
class InvalidDimension(QcondError, ValueError):
    pass


class NotLagrangian(QcondError, ValueError):
    pass


class NotTransverse(QcondError, ValueError):
    pass


class SingularGraph(QcondError, ValueError):
    pass


class FewerThanThreePoints(QcondError, ValueError):
    pass


class ParallelLines(QcondError, ValueError):
    pass


class MissingSupportTags(QcondError, ValueError):
    pass


class InvalidGrid(QcondError, ValueError):
    pass


class UnknownDescriptor(QcondError, ValueError):
    pass


class ZeroDenominator(QcondError, ZeroDivisionError):
    pass


class UnboundedFirstSet(QcondError, ValueError):
    pass


class ZeroTimeSeparation(QcondError, ValueError):
    pass


class CoincidentTimes(QcondError, ValueError):
    pass


class UnboundedConditionSet(QcondError, ValueError):
    pass


class CausticTime(QcondError, ValueError):
    pass


class HypothesisViolation(QcondError, ValueError):
    """A theorem hypothesis failed. ``which`` names the failing hypothesis."""

    def __init__(self, message, which=None):
        super().__init__(message)
        self.which = which


class DegeneratePairing(QcondError, ValueError):
    pass


class DegenerateDirections(QcondError, ValueError):
    pass


class UnsupportedChainLength(UserWarning):
    """Warning category: chain length outside the closed-form case."""
