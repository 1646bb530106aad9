"""Exception and warning types raised across the package."""


class FlyQubitError(Exception):
    """Base class for all errors raised by flyqubit."""


class InvalidOperator(FlyQubitError, ValueError):
    """Operator has non-finite entries or violates a required structure."""


class ShapeError(FlyQubitError, ValueError):
    """Operands have incompatible dimensions."""


class NotAState(FlyQubitError, ValueError):
    """Matrix is not a density matrix within tolerance."""


class AmbiguousRank(FlyQubitError, ValueError):
    """Spectrum has eigenvalues too close to the rank cut to split cleanly."""


class IntegrationError(FlyQubitError, RuntimeError):
    """Time-ordered exponential failed to reach the requested accuracy."""


class QuadratureError(FlyQubitError, RuntimeError):
    """Numerical quadrature failed to converge."""


class IncompleteScenario(FlyQubitError, ValueError):
    """Scenario lacks data needed for the requested quantity."""


class PerturbationTooLarge(FlyQubitError, ValueError):
    """Perturbative state left the physical region beyond the allowed floor."""


class UnstableStep(FlyQubitError, ValueError):
    """Time step violates the stability bound of the grid propagator."""


class GridTooSmall(FlyQubitError, ValueError):
    """Wavepacket probability reaches the grid edges."""


class InvalidCorrelation(FlyQubitError, ValueError):
    """Position correlation yields a non-positive relative spread."""


class ConfigError(FlyQubitError, ValueError):
    """Experiment configuration failed validation."""


class OutOfValidity(UserWarning):
    """Closed-form perturbative result used outside its validity range."""


class DegenerateSpectrum(UserWarning):
    """Degenerate eigenvalue pairs were excluded from a perturbative sum."""


class PSDClipped(UserWarning):
    """Small negative eigenvalues were clipped to zero."""


class LargeEpsilon(UserWarning):
    """Localization parameter is too large for the perturbative expansion."""


class CalibrationError(FlyQubitError, RuntimeError):
    """Potential parameters implementing a target gate could not be found."""
