"""Residualization (annihilator) and residual covariance kernel tests."""

import numpy as np
import pytest

from rapls.errors import CollinearCovariatesError, InvalidArgumentError
from rapls.grids import make_grid
from rapls.residual import build_annihilator, residual_cov


class TestAnnihilator:
    def test_empty_covariates_identity(self):
        A = build_annihilator(np.zeros((5, 0)))
        v = np.arange(5.0)
        np.testing.assert_array_equal(A.apply(v), v)

    def test_ones_column_centers(self):
        A = build_annihilator(np.ones((6, 1)))
        v = np.arange(6.0)
        np.testing.assert_allclose(A.apply(v), v - v.mean(), atol=1e-12)

    def test_annihilates_own_columns(self):
        rng = np.random.default_rng(0)
        Z = rng.standard_normal((30, 3))
        A = build_annihilator(Z)
        for k in range(3):
            r = A.apply(Z[:, k])
            assert np.linalg.norm(r) < 1e-10 * np.linalg.norm(Z[:, k])

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        Z = rng.standard_normal((25, 2))
        A = build_annihilator(Z)
        v = rng.standard_normal(25)
        once = A.apply(v)
        np.testing.assert_allclose(A.apply(once), once, rtol=1e-12, atol=1e-12)

    def test_orthogonality(self):
        rng = np.random.default_rng(2)
        Z = rng.standard_normal((40, 4))
        A = build_annihilator(Z)
        v = rng.standard_normal(40)
        resid = Z.T @ A.apply(v)
        assert np.linalg.norm(resid) < 1e-10 * np.linalg.norm(Z) * np.linalg.norm(v)

    def test_matrix_apply(self):
        rng = np.random.default_rng(3)
        Z = rng.standard_normal((20, 2))
        V = rng.standard_normal((20, 7))
        A = build_annihilator(Z)
        cols = np.column_stack([A.apply(V[:, j]) for j in range(7)])
        np.testing.assert_allclose(A.apply(V), cols, rtol=1e-12, atol=1e-12)

    def test_collinear_rejected(self):
        Z = np.ones((10, 2))
        with pytest.raises(CollinearCovariatesError):
            build_annihilator(Z)

    def test_too_many_covariates(self):
        with pytest.raises(InvalidArgumentError):
            build_annihilator(np.eye(3))


class TestResidualCov:
    def test_single_constant_curve(self):
        grid = make_grid(4, 0.0, 1.0)
        X = np.full((1, 4), 2.0)
        A = build_annihilator(np.zeros((1, 0)))
        K = residual_cov(X, A, grid)
        np.testing.assert_allclose(K.values, 4.0)

    def test_psd(self):
        rng = np.random.default_rng(5)
        grid = make_grid(12, 0.0, 1.0)
        X = rng.standard_normal((8, 12))
        A = build_annihilator(rng.standard_normal((8, 2)))
        vals = np.linalg.eigvalsh(residual_cov(X, A, grid).values)
        assert vals.min() >= -1e-10 * max(vals.max(), 0.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(6)
        grid = make_grid(2, 0.0, 1.0)
        n = 3
        X = rng.standard_normal((n, 2))
        Z = rng.standard_normal((n, 1))
        A = build_annihilator(Z)
        R = np.stack([A.apply(X[:, g][:, None]).ravel() for g in range(2)], axis=1)
        brute = np.zeros((2, 2))
        for s in range(2):
            for t in range(2):
                brute[s, t] = sum(R[i, s] * R[i, t] for i in range(n)) / n
        np.testing.assert_allclose(residual_cov(X, A, grid).values, brute, rtol=1e-12)

    def test_invariant_to_linear_in_z_shift(self):
        rng = np.random.default_rng(7)
        grid = make_grid(15, 0.0, 1.0)
        n = 30
        X = rng.standard_normal((n, 15))
        Z = rng.standard_normal((n, 2))
        A = build_annihilator(Z)
        nu = rng.standard_normal((2, 15))
        K1 = residual_cov(X, A, grid).values
        K2 = residual_cov(X + Z @ nu, A, grid).values
        np.testing.assert_allclose(K1, K2, rtol=1e-8, atol=1e-8 * np.abs(K1).max())

    def test_dimension_checks(self):
        grid = make_grid(5, 0.0, 1.0)
        A = build_annihilator(np.zeros((4, 0)))
        with pytest.raises(InvalidArgumentError):
            residual_cov(np.zeros((4, 6)), A, grid)
        with pytest.raises(InvalidArgumentError):
            residual_cov(np.zeros((3, 5)), A, grid)
