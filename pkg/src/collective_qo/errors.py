"""Exception hierarchy shared across the package."""


class CollectiveQOError(Exception):
    """Base class for all package errors."""


class ValidationError(CollectiveQOError, ValueError):
    """Invalid input: a violated invariant or precondition."""


class NumericalError(CollectiveQOError, RuntimeError):
    """A numerical procedure failed or produced an unusable result."""


class DegenerateSteadyStateError(NumericalError):
    """The Liouvillian has more than one zero eigenvalue."""


class IntegrationError(NumericalError):
    """An ODE integrator or trajectory stepper failed."""


class HeraldImpossibleError(NumericalError):
    """The heralding operator annihilates the state."""
