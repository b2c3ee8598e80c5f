"""Exception types shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, ResourceLimitError -> 2,
VerificationError -> 3.
"""


class UsageError(ValueError):
    """Bad arguments, malformed config, or violated call preconditions."""


class ResourceLimitError(RuntimeError):
    """An operation would exceed a documented scale gate (e.g. ball cap)."""


class VerificationError(RuntimeError):
    """A verification run failed an asserted property."""


class DominanceError(VerificationError):
    """CDF dominance required by the down-sampling coupling does not hold.

    Raised before any biased sampling can happen; carries diagnostics about
    which prefix violates and whether the sufficient regime condition on k
    was satisfied.
    """

    def __init__(self, message: str, *, violations=None, regime_ok=None):
        super().__init__(message)
        self.violations = violations
        self.regime_ok = regime_ok
