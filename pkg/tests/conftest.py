"""Shared fixtures and toy-data builders for the test suite."""

import numpy as np
import pytest

from rapls.core import Dataset
from rapls.grids import cosine_basis_matrix, make_grid


def toy_dataset(
    seed=0,
    n=40,
    G=60,
    q=1,
    family="gaussian",
    n_terms=8,
    alpha0=0.5,
    alpha=None,
    noise=0.3,
    coef=None,
):
    """Small synthetic dataset with curves from a truncated cosine model.

    Returns (Dataset, dict) where the dict carries the generating truth.
    """
    rng = np.random.default_rng(seed)
    grid = make_grid(G, 0.0, 1.0)
    Phi = cosine_basis_matrix(n_terms, grid)
    xi = rng.standard_normal((n, n_terms))
    scale = np.arange(1, n_terms + 1) ** -0.5
    X = (xi * scale) @ Phi
    Z = rng.standard_normal((n, q)) if q else np.zeros((n, 0))
    if alpha is None:
        alpha = np.linspace(1.0, 0.5, q) if q else np.zeros(0)
    if coef is None:
        coef = np.zeros(n_terms)
        coef[: min(3, n_terms)] = [1.0, -0.5, 0.25][: min(3, n_terms)]
    b_star = coef @ Phi
    eta = alpha0 + Z @ alpha + X @ (grid.weights * b_star)
    if family == "gaussian":
        y = eta + noise * rng.standard_normal(n)
    elif family == "poisson":
        y = rng.poisson(np.exp(np.clip(eta, None, 8.0))).astype(float)
    elif family == "bernoulli":
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    else:
        raise ValueError(family)
    truth = {
        "alpha0": alpha0,
        "alpha": np.asarray(alpha, dtype=float),
        "b_star": b_star,
        "eta": eta,
        "grid": grid,
        "Phi": Phi,
    }
    return Dataset(y=y, X=X, Z=Z, grid=grid), truth


@pytest.fixture
def gaussian_toy():
    return toy_dataset(seed=7)


@pytest.fixture
def poisson_toy():
    return toy_dataset(seed=11, family="poisson", noise=0.0, alpha0=0.2)


@pytest.fixture
def bernoulli_toy():
    return toy_dataset(seed=13, n=80, family="bernoulli")
