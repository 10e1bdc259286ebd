"""Exception hierarchy shared across the package."""


class IpfnetError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(IpfnetError):
    """Malformed or inconsistent input (bad file, dimension mismatch, ...)."""


class StructuralInfeasibilityError(IpfnetError):
    """A positive marginal cannot receive any mass through the support.

    Raised when an IPF sweep divides by zero: some row (or column) with a
    positive target marginal has no support on columns (rows) that carry
    positive marginals.  The repair utilities in :mod:`ipfnet.repair` add the
    missing edges.
    """

    def __init__(self, axis, index):
        self.axis = axis  # "row" or "col"
        self.index = index
        super().__init__(
            f"{axis} {index} has a positive target marginal but no usable "
            f"support; run the repair routines (ipfnet repair) first"
        )


class InfeasibleError(IpfnetError):
    """An operation that requires balanced feasible input got an infeasible one."""


class NonConvergenceError(IpfnetError):
    """An iterative routine exhausted its iteration budget."""
