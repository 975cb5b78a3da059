"""Scalar-covariate residualization and the empirical residual covariance.

The annihilator applies v -> v - Z (Z'Z)^{-1} Z' v without ever forming the
n x n projector; the residual covariance kernel is the Gram matrix of the
residualized curves divided by n.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .errors import CollinearCovariatesError, InvalidArgumentError
from .grids import Grid, KernelMatrix

__all__ = ["Annihilator", "build_annihilator", "residual_cov"]

_COND_LIMIT = 1e12


class Annihilator:
    """Projection onto the orthogonal complement of the columns of Z.

    For q = 0 this is the identity map. Z is used as given; callers center
    the columns when the zero-mean convention is wanted.
    """

    def __init__(self, Z: np.ndarray):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim != 2:
            raise InvalidArgumentError("Z must be a 2-d array")
        n, q = Z.shape
        if q >= n:
            raise InvalidArgumentError("need more subjects than covariates")
        self.Z = Z
        self.n, self.q = n, q
        if q == 0:
            self._cho = None
            return
        ZtZ = Z.T @ Z
        if np.linalg.cond(ZtZ) >= _COND_LIMIT:
            raise CollinearCovariatesError(
                "scalar covariates are collinear (Z'Z condition >= 1e12)"
            )
        self._cho = linalg.cho_factor(ZtZ)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Residualize v (a vector or an n x m matrix) against Z."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise InvalidArgumentError("leading dimension must equal n")
        if self.q == 0:
            return v.copy()
        return v - self.Z @ linalg.cho_solve(self._cho, self.Z.T @ v)

    def solve_normal(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (Z'Z) a = rhs. Used for the plug-in alpha estimate."""
        if self.q == 0:
            return np.zeros(0)
        return linalg.cho_solve(self._cho, rhs)


def build_annihilator(Z: np.ndarray) -> Annihilator:
    """Build the residualizing projector for the covariate matrix Z."""
    return Annihilator(Z)


def residual_cov(X: np.ndarray, A: Annihilator, grid: Grid) -> KernelMatrix:
    """Empirical covariance kernel of the residualized curves.

    Returns n^{-1} (M_Z X)' (M_Z X) as a G x G kernel on `grid`. The divisor
    is n regardless of q; any scale mismatch is absorbed by the Krylov
    coefficients downstream.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != grid.size:
        raise InvalidArgumentError("X must be n x G on the given grid")
    if X.shape[0] != A.n:
        raise InvalidArgumentError("X and the annihilator disagree on n")
    R = A.apply(X)
    C = (R.T @ R) / X.shape[0]
    return KernelMatrix(grid, C)
