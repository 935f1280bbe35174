"""Exception types shared across the package."""


class TEQSCIError(Exception):
    """Base class for package errors."""


class ParseError(TEQSCIError, ValueError):
    """Malformed FCIDUMP or config input."""


class NormalizationError(TEQSCIError, ValueError):
    pass


class NonHermitianResidue(TEQSCIError, ValueError):
    pass


class CapacityError(TEQSCIError, ValueError):
    """Requested size exceeds what the input or solver can hold."""


class DimensionMismatch(TEQSCIError, ValueError):
    pass


class SectorError(TEQSCIError, ValueError):
    """State has support in more than one particle-number sector."""


class SectorLeak(TEQSCIError, ValueError):
    """Hamiltonian maps a sector state outside its sector."""


class ConvergenceError(TEQSCIError, RuntimeError):
    pass


class EmptySelection(TEQSCIError, ValueError):
    pass


class NotReached(TEQSCIError, RuntimeError):
    """Error tolerance not met even with the full sector."""


class InsufficientData(TEQSCIError, ValueError):
    pass


class DegenerateFit(TEQSCIError, ValueError):
    pass


class DivergenceWarning(UserWarning):
    """Truncated series is not converged at the requested time."""
