"""Exception hierarchy shared by all ttkl modules."""


class TTKLError(Exception):
    """Base class for every error raised by ttkl."""


class NonConvergent(TTKLError):
    """Adaptive Chebyshev construction did not resolve the function."""


class DomainMismatch(TTKLError):
    pass


class BlockMismatch(TTKLError):
    pass


class ShapeMismatch(TTKLError):
    pass


class RankDeficient(TTKLError):
    """A diagonal entry of R fell below the relative rank threshold.

    The partial factorization is attached so callers can truncate instead of
    failing.
    """

    def __init__(self, column, Q=None, R=None):
        super().__init__(f"rank deficient at column {column}")
        self.column = column
        self.Q = Q
        self.R = R


class IndexOutOfRange(TTKLError):
    pass


class AllZero(TTKLError):
    pass


class SingularCrossMatrix(TTKLError):
    def __init__(self, k, cond):
        super().__init__(f"cross matrix at dimension {k} is singular (cond={cond:.3e})")
        self.k = k
        self.cond = cond


class NotConverged(TTKLError):
    def __init__(self, diagnostics, message="TT-cross did not converge"):
        super().__init__(message)
        self.diagnostics = diagnostics


class NoneRetained(TTKLError):
    pass


class ZeroReference(TTKLError):
    pass


class QuadratureNotConverged(TTKLError):
    pass


class ConfigError(TTKLError):
    pass


class StageFailed(TTKLError):
    def __init__(self, stage, diagnostics=None, message=None):
        super().__init__(message or f"stage '{stage}' failed")
        self.stage = stage
        self.diagnostics = diagnostics
