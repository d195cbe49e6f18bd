"""Exception hierarchy for wavetrans."""


class WavetransError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateCutoff(WavetransError, ValueError):
    """kX/pi is (numerically) an integer: a standing wave sits at cutoff."""


class OutOfDomain(WavetransError, ValueError):
    pass


class InvalidCorrelationLength(WavetransError, ValueError):
    pass


class NegativeSpectrum(WavetransError, ValueError):
    pass


class ZeroScattering(WavetransError, ValueError):
    pass


class EigensolveFailure(WavetransError, ArithmeticError):
    pass


class EquipartitionUndefined(WavetransError, ValueError):
    pass


class EmptyAperture(WavetransError, ValueError):
    pass


class ExpmFailure(WavetransError, ArithmeticError):
    pass


class DegenerateSpectrum(WavetransError, ValueError):
    """Perturbation formulas need distinct eigenvalues."""


class UnsupportedProfile(WavetransError, TypeError):
    pass


class DimensionMismatch(WavetransError, ValueError):
    pass


class GridTooCoarse(WavetransError, ValueError):
    pass


class LagOutOfRange(WavetransError, ValueError):
    pass


class NoPeaks(WavetransError, ValueError):
    pass


class AtBoundary(WavetransError, ValueError):
    pass


class IllConditionedAperture(WavetransError, ValueError):
    pass


class CutoffTooAggressive(WavetransError, ValueError):
    pass


class TooFewModes(WavetransError, ValueError):
    pass


class NNLSNonConvergence(WavetransError, ArithmeticError):
    pass


class ConfigInvalid(WavetransError, ValueError):
    pass


class UnknownFigure(WavetransError, KeyError):
    pass
