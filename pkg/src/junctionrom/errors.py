"""Exception types shared across the package."""


class JunctionRomError(Exception):
    """Base class for all package errors."""


class ConfigurationError(JunctionRomError):
    """Invalid user-supplied configuration (bad intervals, unknown names, ...)."""


class DegenerateDataError(JunctionRomError):
    """Fitting data that does not determine the requested coefficients."""


class TrainingError(JunctionRomError):
    """Regressor training failed (empty data, NaNs, divergence)."""


class DatasetError(JunctionRomError):
    """Dataset construction failed or produced too many per-geometry failures."""


class FingerprintError(JunctionRomError):
    """Artifacts from incompatible runs were combined (dataset/model mismatch)."""


class SolverError(JunctionRomError):
    """Newton iteration failed to converge.

    Carries the last residual norm and iterate, and the transient step index
    when the failure happened inside a time march.
    """

    def __init__(self, message, residual_norm=None, iterate=None, step_index=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterate = iterate
        self.step_index = step_index
