"""Exception types shared across the package."""


class PressureLabError(Exception):
    """Base class for all numerical and configuration failures."""


class ValidationFailed(PressureLabError):
    pass


class NotLoxodromic(PressureLabError):
    pass


class SingularInput(PressureLabError):
    pass


class GapTooSmall(PressureLabError):
    pass


class OutsideValidity(PressureLabError):
    pass


class ConstraintDiverged(PressureLabError):
    pass


class GaugeNotFound(PressureLabError):
    pass


class HorizonExceeded(PressureLabError):
    pass


class EmptyWindow(PressureLabError):
    pass


class InsufficientData(PressureLabError):
    pass


class UnsupportedGroup(PressureLabError):
    pass


class BracketFailed(PressureLabError):
    pass


class StencilValidationFailed(PressureLabError):
    pass


class NoiseDominates(PressureLabError):
    pass


class ZeroDenominator(PressureLabError):
    pass


class AxesIntersect(PressureLabError):
    pass


class ConfigInvalid(PressureLabError):
    pass
