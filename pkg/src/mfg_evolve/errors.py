"""Exception types shared across the package."""


class MfgEvolveError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MfgEvolveError):
    """Malformed or semantically invalid configuration input."""


class PolicyExplosion(MfgEvolveError):
    """Deterministic-policy count exceeds the enumeration cap."""


class InfeasibleAction(MfgEvolveError):
    """Action is not available in the given state."""


class InvalidParams(MfgEvolveError):
    """Built-in model parameters violate their constraints."""


class NumericalFailure(MfgEvolveError):
    """A linear solve left a residual above tolerance."""


class NotIrreducible(MfgEvolveError):
    """Policy-induced state chain is not strongly connected."""


class WrongProtocol(MfgEvolveError):
    """Operation requires a different revision-protocol family."""


class StepRejected(MfgEvolveError):
    """Integrator step produced entries too negative to repair."""


class RateBoundViolated(MfgEvolveError):
    """Total switch probability at a revision exceeded one."""


class AssumptionViolated(MfgEvolveError):
    """A structural precondition of the requested computation failed."""


class NotMsne(MfgEvolveError):
    """Strictness check requires an equilibrium input."""
