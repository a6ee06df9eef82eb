"""Exception types raised by the package."""


class BoltzfastError(Exception):
    """Base class for all errors raised here."""


class DealiasingViolation(BoltzfastError, ValueError):
    pass


class ShapeMismatch(BoltzfastError, ValueError):
    pass


class NonHermitian(BoltzfastError, ValueError):
    pass


class ConfigMismatch(BoltzfastError, ValueError):
    pass


class NonIntegrable(BoltzfastError, ValueError):
    pass


class SymmetricFlagInvalid(BoltzfastError, ValueError):
    pass


class IndexOutOfRange(BoltzfastError, IndexError):
    pass


class QuadratureNoConvergence(BoltzfastError, RuntimeError):
    pass


class TooLargeForOracle(BoltzfastError, ValueError):
    pass


class BlowUp(BoltzfastError, FloatingPointError):
    pass


class NonPositiveTemperature(BoltzfastError, ValueError):
    pass


class WrongKernelClock(BoltzfastError, ValueError):
    pass


class ResidualTooLarge(BoltzfastError, RuntimeError):
    pass


class ZeroReference(BoltzfastError, ZeroDivisionError):
    pass


class DumpFormatError(BoltzfastError, ValueError):
    """A binary dump has a bad magic string, shape or checksum."""
