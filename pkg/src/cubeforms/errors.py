"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: assertion-style failures are 1,
usage problems 2, refused preconditions 3, exceeded budgets 4.
"""


class CubeformsError(Exception):
    pass


class DimensionMismatch(CubeformsError):
    """Operands defined over different n or different primes."""


class DomainMismatch(CubeformsError):
    """Distributions over domains of different sizes."""


class PreconditionFailed(CubeformsError):
    """An operation refused its input rather than mis-certify a claim."""


class BudgetExceeded(CubeformsError):
    """An enumeration would exceed the configured desk-scale budget."""


class StageEmpty(CubeformsError):
    """A selection stage emptied out; carries the stage name."""

    def __init__(self, stage: str, message: str = ""):
        self.stage = stage
        super().__init__(message or f"selection stage {stage!r} produced an empty set")
