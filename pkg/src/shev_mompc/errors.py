"""Exception types shared across the package."""


class ShevError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ShevError):
    """A parameter set, config or input file violates an invariant."""


class ParseError(ShevError):
    """A CSV or JSON input could not be parsed."""


class DomainError(ShevError):
    """A model equation was evaluated outside its mathematical domain."""


class RangeError(ShevError):
    """A requested operating point lies outside the physical envelope."""


class DegenerateDataError(ShevError):
    """A regression input has no usable rank (e.g. all abscissae equal)."""


class CallbackError(ShevError):
    """A user-supplied solver callback returned a non-finite value."""


class SimulationAbort(ShevError):
    """The closed-loop harness hit an unrecoverable inconsistency."""
