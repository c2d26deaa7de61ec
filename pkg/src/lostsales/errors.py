"""Exception hierarchy.

Two families matter to callers: ``ValidationError`` for bad inputs and
``NumericalGuardError`` for computations that hit a configured budget or
tolerance. The command line maps them to exit codes 2 and 3.
"""


class LostSalesError(Exception):
    """Base class for all package errors."""


class ValidationError(LostSalesError, ValueError):
    pass


class NumericalGuardError(LostSalesError, ArithmeticError):
    pass


# demand models
class ZeroVarianceError(ValidationError):
    pass


class NegativeMassError(ValidationError):
    pass


class BadSpanError(ValidationError):
    pass


class BadParamError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class RTooLargeError(ValidationError):
    pass


class NotLatticeError(ValidationError):
    pass


# ladder machinery
class DepthExceededError(NumericalGuardError):
    pass


class WalkCapError(NumericalGuardError):
    pass


class DegenerateLadderError(NumericalGuardError):
    pass


class AtomOneError(NumericalGuardError):
    pass


class CapExceededError(NumericalGuardError):
    pass


class RootFindingError(NumericalGuardError):
    pass


# value function
class OffGridError(ValidationError):
    pass


class BeyondTableError(NumericalGuardError):
    pass


# mdp
class StateBudgetExceededError(NumericalGuardError):
    pass


class NoConvergenceError(NumericalGuardError):
    pass


class MultichainError(NumericalGuardError):
    pass


# tuning
class BracketMissError(NumericalGuardError):
    pass
