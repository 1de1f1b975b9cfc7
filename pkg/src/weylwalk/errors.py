"""Exception hierarchy shared by all modules."""


class WeylWalkError(Exception):
    """Base class for toolkit errors."""


class InvalidInputError(WeylWalkError, ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedError(WeylWalkError):
    """The requested combination of options is not provided."""


class UnsupportedDistributionError(UnsupportedError):
    """A step law without the closed-form moments the validator needs."""


class DegenerateConditioningError(WeylWalkError):
    """Conditioning on an event of probability zero."""


class NumericalContractError(WeylWalkError):
    """A numerical invariant was violated (e.g. a nonpositive transform)."""


class InstanceTooLargeError(WeylWalkError):
    """Brute-force enumeration refused because the path count is too large."""


class BoundaryStartWarning(UserWarning):
    """The starting point lies outside the open chamber."""
