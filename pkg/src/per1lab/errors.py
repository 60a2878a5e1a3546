"""Exception types shared across the package."""


class Per1Error(Exception):
    """Base class for all library errors."""


class NonConvergence(Per1Error):
    """An iteration budget ran out before the certified tail cleared the tolerance."""


class GammaDivergence(Per1Error):
    """The series for gamma(lambda) cannot be certified (unit-modulus lambda != 1)."""


class BudgetExceeded(Per1Error):
    """A requested size exceeds the configured exact-arithmetic budget."""


class DegenerateRelation(Per1Error):
    """An orbit-relation polynomial vanished identically."""


class SolverStall(Per1Error):
    """Root solving missed its residual target.

    The best-effort root set is attached as ``roots``.
    """

    def __init__(self, message, roots=None):
        super().__init__(message)
        self.roots = roots


class RootOfUnity(Per1Error):
    """lambda is a root of unity other than 1."""


class PrecisionExhausted(Per1Error):
    """p-adic working precision was lost to cancellation."""


class CoincidentPoints(Per1Error):
    """The Arakelov-Green function was evaluated on the diagonal."""
