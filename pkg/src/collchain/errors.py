"""Exception hierarchy shared by all modules."""


class CollChainError(Exception):
    """Base class for every error raised by collchain."""


class InvalidSpec(CollChainError, ValueError):
    pass


class NonIntegerExcitation(CollChainError):
    pass


class NoOpenChannel(CollChainError, ValueError):
    pass


class SingularKMatrix(CollChainError, ValueError):
    pass


class ThresholdEnergy(CollChainError, ValueError):
    pass


class InvalidMomentum(CollChainError, ValueError):
    pass


class LinearSolveFailure(CollChainError):
    pass


class QuadratureNotConverged(CollChainError):
    def __init__(self, message, max_change=None):
        super().__init__(message)
        self.max_change = max_change


class BandOverlap(CollChainError, ValueError):
    pass


class NotCompletelyPositive(CollChainError):
    pass


class WrongVariant(CollChainError, ValueError):
    pass


class DimensionMismatch(CollChainError, ValueError):
    pass


class IllConditionedSpectral(CollChainError):
    pass


class DegenerateSteadyState(CollChainError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class DegenerateGap(CollChainError):
    pass


class NegativeRate(CollChainError):
    pass


class ParseError(CollChainError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(CollChainError, ValueError):
    pass


class UnknownFigure(CollChainError, ValueError):
    pass
