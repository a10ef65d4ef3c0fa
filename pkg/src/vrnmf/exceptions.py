"""Exception types raised across the vrnmf package."""


class VrnmfError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(VrnmfError):
    """Shapes do not conform (empty input, mismatched sizes)."""


class NonFiniteError(VrnmfError):
    """A matrix or vector contains NaN or infinite entries."""


class ContractError(VrnmfError):
    """An input violates a documented precondition (asymmetry, infeasible
    start, constant vector where an angle is required, ...)."""


class DegeneracyError(VrnmfError):
    """A matrix that must have full column rank does not."""


class InfeasibleError(VrnmfError):
    """A sampling or configuration request cannot be satisfied."""


class SolverError(VrnmfError):
    """An iterative solver cannot proceed (no valid step size, ...)."""
