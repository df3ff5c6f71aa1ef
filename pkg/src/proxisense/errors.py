"""Exception types shared across the package."""


class ProxisenseError(Exception):
    """Base class for all package errors."""


class ConfigError(ProxisenseError):
    """Invalid or malformed configuration input."""


class ScenarioError(ProxisenseError):
    """Invalid scenario description."""


class InfeasibleScenarioError(ScenarioError):
    """Well-formed scenario whose actuation the robot cannot realize."""


class BucklingError(ProxisenseError):
    """Axial load close to the buckling-critical compressive value."""


class ConvergenceError(ProxisenseError):
    """Equilibrium iteration failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InfeasibleDisplacementError(ProxisenseError):
    """No admissible tension reproduces the commanded cable lengths."""


class EstimationFailedError(ProxisenseError):
    """Every contact-location candidate failed to converge."""


class RecalibrationAborted(ProxisenseError):
    """External load drifted during the reciprocation maneuver."""


class OracleFailure(ProxisenseError):
    """The independent ODE oracle failed; a test-infrastructure error."""
