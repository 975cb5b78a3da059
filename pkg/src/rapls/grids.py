"""Quadrature grids, discretized functions, and kernels-as-operators.

All integrals in the package are trapezoid-rule weighted dot products on a
shared uniform-or-not grid, so every operator application stays a plain
matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, InvalidArgumentError

__all__ = [
    "Grid",
    "DiscretizedFunction",
    "KernelMatrix",
    "make_grid",
    "inner_product",
    "apply_kernel",
    "cosine_basis",
]


@dataclass(frozen=True)
class Grid:
    """Strictly increasing points on a closed interval with quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        if points.ndim != 1 or weights.ndim != 1 or len(points) != len(weights):
            raise InvalidArgumentError("points and weights must be 1-d of equal length")
        if len(points) < 2:
            raise InvalidArgumentError("a grid needs at least 2 points")
        if not np.all(np.diff(points) > 0):
            raise InvalidArgumentError("grid points must be strictly increasing")
        if np.any(weights < 0):
            raise InvalidArgumentError("quadrature weights must be nonnegative")
        length = points[-1] - points[0]
        if abs(weights.sum() - length) > 1e-12 * max(length, 1.0):
            raise InvalidArgumentError("weights must sum to the domain length")

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    def matches(self, other: "Grid") -> bool:
        if self is other:
            return True
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.weights, other.weights
        )


def _require_same_grid(a: Grid, b: Grid) -> None:
    if not a.matches(b):
        raise GridMismatchError("objects do not share a grid")


@dataclass(frozen=True)
class DiscretizedFunction:
    """A real-valued function evaluated on a shared grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.size,):
            raise InvalidArgumentError("values must have one entry per grid point")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("function values must be finite")

    def __add__(self, other: "DiscretizedFunction") -> "DiscretizedFunction":
        _require_same_grid(self.grid, other.grid)
        return DiscretizedFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "DiscretizedFunction") -> "DiscretizedFunction":
        _require_same_grid(self.grid, other.grid)
        return DiscretizedFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "DiscretizedFunction":
        return DiscretizedFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def norm(self) -> float:
        """Quadrature L2 norm."""
        return float(np.sqrt(inner_product(self, self)))


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric G x G discretization of a bivariate kernel.

    Inputs are symmetrized as (K + K')/2 on construction to strip
    floating-point asymmetry before any eigen/solve step.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size, self.grid.size):
            raise InvalidArgumentError("kernel must be G x G on its grid")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("kernel entries must be finite")
        scale = np.abs(values).max()
        if scale > 0 and np.abs(values - values.T).max() > 1e-10 * scale:
            raise InvalidArgumentError("kernel is not symmetric within tolerance")
        object.__setattr__(self, "values", 0.5 * (values + values.T))


def make_grid(n_points: int, lo: float, hi: float) -> Grid:
    """Equally spaced grid on [lo, hi] with trapezoid weights.

    Endpoints carry half weight; the weights sum to hi - lo exactly.
    """
    if n_points < 2:
        raise InvalidArgumentError("n_points must be >= 2")
    if not lo < hi:
        raise InvalidArgumentError("need lo < hi")
    points = np.linspace(lo, hi, n_points)
    h = (hi - lo) / (n_points - 1)
    weights = np.full(n_points, h)
    weights[0] = weights[-1] = h / 2
    return Grid(points, weights)


def inner_product(f: DiscretizedFunction, g: DiscretizedFunction) -> float:
    """Quadrature approximation of the L2 inner product of f and g."""
    _require_same_grid(f.grid, g.grid)
    return float(np.dot(f.grid.weights, f.values * g.values))


def apply_kernel(K: KernelMatrix, f: DiscretizedFunction) -> DiscretizedFunction:
    """Apply the integral operator g(s) = int K(s,t) f(t) dt by quadrature."""
    _require_same_grid(K.grid, f.grid)
    out = K.values @ (K.grid.weights * f.values)
    return DiscretizedFunction(f.grid, out)


def cosine_basis(k: int, grid: Grid) -> DiscretizedFunction:
    """k-th member of the orthonormal cosine family sqrt(2) cos(k pi t) on [0,1]."""
    if k < 1:
        raise InvalidArgumentError("basis index k must be >= 1")
    if abs(grid.lo) > 1e-12 or abs(grid.hi - 1.0) > 1e-12:
        raise InvalidArgumentError("cosine basis requires the domain [0, 1]")
    return DiscretizedFunction(grid, np.sqrt(2.0) * np.cos(k * np.pi * grid.points))


def cosine_basis_matrix(k_max: int, grid: Grid) -> np.ndarray:
    """Rows 1..k_max of the cosine family as a (k_max, G) array. Internal helper."""
    if k_max < 1:
        raise InvalidArgumentError("k_max must be >= 1")
    if abs(grid.lo) > 1e-12 or abs(grid.hi - 1.0) > 1e-12:
        raise InvalidArgumentError("cosine basis requires the domain [0, 1]")
    k = np.arange(1, k_max + 1)[:, None]
    return np.sqrt(2.0) * np.cos(k * np.pi * grid.points[None, :])
