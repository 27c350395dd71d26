"""Exception hierarchy shared by all modules."""


class MdspecError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MdspecError, ValueError):
    """Invalid configuration detected before any heavy computation."""


class UnsupportedManifoldError(MdspecError, ValueError):
    pass


class UnsupportedOracleError(MdspecError, ValueError):
    """No closed-form spectrum / heat kernel for the requested manifold."""


class OffManifoldError(MdspecError, ValueError):
    pass


class InvalidBandwidthError(MdspecError, ValueError):
    pass


class InvalidTimeError(MdspecError, ValueError):
    pass


class InvalidRegularizationError(MdspecError, ValueError):
    pass


class ShapeError(MdspecError, ValueError):
    pass


class BoundsError(MdspecError, IndexError):
    pass


class AsymmetricInputError(MdspecError, ValueError):
    pass


class MultiplicityError(MdspecError, ValueError):
    pass


class NumericalError(MdspecError, ArithmeticError):
    """Base for failures of a numerical stage (CLI exit code 3)."""


class ConvergenceError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegenerateEigenvalueError(NumericalError):
    def __init__(self, message, q_reduced=None):
        super().__init__(message)
        self.q_reduced = q_reduced


class ParseError(MdspecError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MetadataError(MdspecError, ValueError):
    pass
