"""Exception hierarchy shared by every module of the package."""


class DHTError(Exception):
    """Base class for all errors raised by dhtlearn."""


class InputError(DHTError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(DHTError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class CapacityError(DHTError):
    """The request exceeds a hard size guard (exponential oracles, joint tables)."""


class ConfigError(DHTError, ValueError):
    """A simulation or experiment configuration is invalid."""


class NumericDegeneracyError(DHTError, ArithmeticError):
    """A belief update produced an all-zero unnormalized vector."""


class InvariantViolation(DHTError, AssertionError):
    """A live invariant failed while running in checked mode."""
