"""Typed errors raised by the rapls numerical layers.

Every failure mode a caller can act on gets its own class so that the CLI
can map numerical failures to exit codes without string matching.
"""


class RaplsError(Exception):
    """Base class for all rapls errors."""


class InvalidArgumentError(RaplsError, ValueError):
    """Malformed or inconsistent arguments (dimensions, ranges, domains)."""


class GridMismatchError(RaplsError):
    """Two discretized objects do not share the same grid."""


class InvalidOutcomeError(RaplsError, ValueError):
    """Outcome value outside the support of the exponential family."""


class CollinearCovariatesError(RaplsError):
    """Scalar covariate matrix is (numerically) rank deficient."""


class DegenerateSeedError(RaplsError):
    """Seed direction has (numerically) zero norm: the residualized outcome
    is uncorrelated with the curves."""


class IllConditionedGramError(RaplsError):
    """Krylov Gram matrix is too ill-conditioned to solve.

    Attributes
    ----------
    suggested_p : int
        Largest leading dimension that is still well-conditioned (0 if none).
    """

    def __init__(self, message, suggested_p=0):
        super().__init__(message)
        self.suggested_p = suggested_p


class NonConvergenceError(RaplsError):
    """IRLS outer loop hit max_iter. Carries the last iterate."""

    def __init__(self, message, last_fit=None):
        super().__init__(message)
        self.last_fit = last_fit


class ScoreSolveFailureError(RaplsError):
    """Newton solve of the scalar-parameter score equation failed."""


class DivergenceError(RaplsError):
    """Linear predictor overflowed the family's safe range (NaN log-likelihood)."""


class IllConditionedCalibrationError(RaplsError):
    """Weighted score design in the calibration step is rank deficient."""


class CalibrationFailureError(RaplsError):
    """Newton maximization of the calibrated likelihood failed."""


class DegenerateZetaError(RaplsError):
    """Calibrated residual covariance is singular."""


class RankDeficientError(RaplsError):
    """Requested more principal components than the numerical rank supports.

    Attributes
    ----------
    attainable : int
        Number of components that can be computed.
    """

    def __init__(self, message, attainable=0):
        super().__init__(message)
        self.attainable = attainable


class InvalidFitError(RaplsError):
    """Operation requires a converged fit."""


class SelectionFailureError(RaplsError):
    """Every candidate component count failed. Carries the per-p errors."""

    def __init__(self, message, per_p_errors=None):
        super().__init__(message)
        self.per_p_errors = per_p_errors or {}


class DegenerateReplicationError(RaplsError):
    """A simulated replication produced an unusable dataset (e.g. Poisson
    mean overflow) even after one resampling attempt."""


class ExperimentFailureError(RaplsError):
    """Too many replications failed. Carries the failure log."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or []
