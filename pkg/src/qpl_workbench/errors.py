"""Exception hierarchy for the workbench.

All package-defined errors derive from :class:`WorkbenchError` so callers
(and the CLI exit-code mapping) can catch one base class.
"""


class WorkbenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WorkbenchError):
    """Workbench config file is missing, malformed, or inconsistent."""


class UnknownMaterialError(WorkbenchError, KeyError):
    """Material id not present in the registry."""


class WavelengthRangeError(WorkbenchError, ValueError):
    """Wavelength outside a material model's declared validity range."""


class StackError(WorkbenchError, ValueError):
    """Invalid layer stack or emitter placement."""


class DegeneratePositionError(StackError):
    """Emitter placed exactly on a layer boundary."""


class SearchWindowError(WorkbenchError, ValueError):
    """Degenerate or out-of-domain pole search window."""


class LosslessModeError(WorkbenchError, ValueError):
    """Propagation length requested for a mode with Im(n_eff) = 0."""


class QuadratureConvergenceError(WorkbenchError, RuntimeError):
    """Spectral integral did not converge (tail estimate too large)."""


class PartitionError(WorkbenchError, RuntimeError):
    """Channel partition failed (e.g. negative residual loss rate)."""


class DataError(WorkbenchError, ValueError):
    """Measurement data fails a fitter's preconditions."""


class EmptyChannelError(DataError):
    """A correlation input stream has no events on one detector channel."""


class FitConvergenceError(WorkbenchError, RuntimeError):
    """Nonlinear fit failed to converge."""


class FlatCurveError(WorkbenchError, RuntimeError):
    """Correlation curve is consistent with g2 = 1 (no emitter signature)."""
