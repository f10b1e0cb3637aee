"""Exception hierarchy shared across the package.

The CLI maps ConfigError to exit code 1 and every NumericalError to exit
code 2, so new failure modes should subclass one of these two.
"""


class SimulationError(Exception):
    """Base class for everything raised by this package."""


class ConfigError(SimulationError):
    """Invalid configuration value or unparsable config file."""


class NumericalError(SimulationError):
    """Base class for runtime numerical failures."""


class InsideConductorError(NumericalError):
    """Field requested at a point inside (or on) a conductor cross-section."""


class OnAxisSingularityError(NumericalError):
    """Thin-wire field requested on the wire axis (transverse distance zero)."""


class QuadratureConvergenceError(NumericalError):
    """Cross-section quadrature failed its refinement check."""


class BracketingError(NumericalError):
    """Root finder could not bracket a sign change."""


class ClosureError(NumericalError):
    """Recombination solve failed (no crossing, or no convergence)."""


class NonFiniteStateError(NumericalError):
    """Trajectory integration produced a non-finite state."""
