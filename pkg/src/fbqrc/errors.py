"""Exception types shared across the package."""


class FbqrcError(Exception):
    """Base class for all package errors."""


class ContractViolation(FbqrcError, ValueError):
    """An argument violates an operation's precondition."""


class ResourceError(FbqrcError, MemoryError):
    """The requested Hilbert space exceeds the configured dimension cap."""


class IntegratorError(FbqrcError, ArithmeticError):
    """The fixed-step integrator lost accuracy; increase the substep count."""


class DegenerateTargetError(FbqrcError, ValueError):
    """The scored target segment is constant, so NRMSE is undefined."""


class ReadoutError(FbqrcError, ArithmeticError):
    """A readout became non-finite.

    ``step`` and ``channel`` locate the first offending entry.
    """

    def __init__(self, message, step=None, channel=None):
        super().__init__(message)
        self.step = step
        self.channel = channel


class TruncationError(ReadoutError):
    """The top Fock levels gained more population than the run allows.

    Readouts past this point describe the cutoff, not the cavity.
    """
