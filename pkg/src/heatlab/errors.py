"""Exception hierarchy shared by all heatlab modules."""


class HeatlabError(Exception):
    """Base class for every error raised by heatlab."""


# graph construction and I/O
class InvalidParam(HeatlabError, ValueError):
    pass


class ParseError(HeatlabError, ValueError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DuplicateEdge(ParseError):
    pass


class DuplicateVertex(ParseError):
    pass


class Disconnected(HeatlabError, ValueError):
    pass


class NonpositiveWeight(HeatlabError, ValueError):
    pass


class UnknownVertex(HeatlabError, KeyError):
    pass


# operators
class DomainMismatch(HeatlabError, ValueError):
    pass


class RadiusOutOfRange(HeatlabError, ValueError):
    pass


class NotSubharmonic(HeatlabError, ValueError):
    pass


# spectrum
class ConvergenceFailure(HeatlabError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RadiusTooSmall(HeatlabError, ValueError):
    pass


# eigenfunctions
class NotAdmissible(HeatlabError, ValueError):
    pass


class SolveFailure(HeatlabError, RuntimeError):
    pass


class NotAnEigenfunction(HeatlabError, ValueError):
    pass


class LambdaOutOfRange(HeatlabError, ValueError):
    pass


# heat
class TooLarge(HeatlabError, ValueError):
    pass


class AdmissibilityViolation(HeatlabError, ValueError):
    pass


class MeasureNotNormalized(HeatlabError, ValueError):
    pass


class MixedDomains(HeatlabError, ValueError):
    pass


class OutOfDomain(HeatlabError, ValueError):
    pass


class NonpositiveSample(HeatlabError, ValueError):
    pass


# liouville audit
class DegenerateWindow(HeatlabError, ValueError):
    pass
