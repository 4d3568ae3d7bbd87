"""Exception types raised across the package."""


class PeerMatchError(Exception):
    """Base class for all package errors."""


class MalformedInputError(PeerMatchError, ValueError):
    """Input references unknown ids, mismatched horizons or broken files."""


class DomainError(PeerMatchError, ValueError):
    """A numeric argument is outside its admissible range."""


class ContractError(PeerMatchError, ValueError):
    """An operation was called outside its contract (wrong variant, wrong oracle)."""


class SolverError(PeerMatchError, RuntimeError):
    """The dispatch optimizer failed to produce an exact optimum."""


class InstanceTooLargeError(PeerMatchError, ValueError):
    """Exhaustive search refused because the instance exceeds the size guard."""
