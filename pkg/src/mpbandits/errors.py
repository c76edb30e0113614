"""Exception types shared across the package.

The CLI maps ConfigurationError to exit code 1 and ContractViolation
(including subclasses) to exit code 2.
"""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (unknown scenario, bad flag...)."""


class ContractViolation(ValueError):
    """A call broke an operation precondition (shape mismatch, bad state)."""


class DegeneracyError(ContractViolation):
    """A numeric quantity left its valid region (e.g. non-positive
    Sherman-Morrison denominator, reducible chain)."""


class EpisodeComplete(RuntimeError):
    """Raised when an environment is advanced past its horizon."""
