"""Monte-Carlo harness tests: generators, metrics, and the replication engine."""

import numpy as np
import pytest

from rapls.errors import InvalidArgumentError
from rapls.grids import DiscretizedFunction, cosine_basis, inner_product, make_grid
from rapls.simulate import (
    SimConfig,
    format_records,
    format_summary,
    gen_curves,
    gen_dataset,
    mse_b,
    run_experiment,
    truth_bundle,
)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            SimConfig(family="bernoulli")
        with pytest.raises(InvalidArgumentError):
            SimConfig(scenario="III")
        with pytest.raises(InvalidArgumentError):
            SimConfig(p_policy=("grid", 3))
        with pytest.raises(InvalidArgumentError):
            SimConfig(methods=("rapls", "other"))


class TestGenCurves:
    def test_deterministic(self):
        g = make_grid(100, 0.0, 1.0)
        rng1 = np.random.Generator(np.random.Philox(7))
        rng2 = np.random.Generator(np.random.Philox(7))
        X1, xi1 = gen_curves(10, g, rng1)
        X2, xi2 = gen_curves(10, g, rng2)
        np.testing.assert_array_equal(X1, X2)
        np.testing.assert_array_equal(xi1, xi2)

    def test_zero_coefficients_hook(self):
        g = make_grid(50, 0.0, 1.0)
        rng = np.random.Generator(np.random.Philox(1))
        X, _ = gen_curves(3, g, rng, xi=np.zeros((3, 50)))
        np.testing.assert_array_equal(X, 0.0)

    def test_top_eigenvalue(self):
        g = make_grid(200, 0.0, 1.0)
        rng = np.random.Generator(np.random.Philox(2))
        X, _ = gen_curves(5000, g, rng)
        Xc = X - X.mean(axis=0)
        M = Xc @ (Xc * g.weights).T / 5000
        top = np.linalg.eigvalsh(M).max()
        assert abs(top - 1.0) <= 0.1


class TestTruth:
    def test_scenario_norms(self):
        g = make_grid(900, 0.0, 1.0)
        for family, c in (("gaussian", 1.0), ("poisson", 2.0 / 3.0)):
            for scen in ("I", "II"):
                t = truth_bundle(SimConfig(family=family, scenario=scen), g)
                norm2 = inner_product(t.b_star, t.b_star)
                assert norm2 == pytest.approx(25 * c**2, abs=1e-3)
        assert t.alpha_star == 1.0 and t.alpha0_star == 0.5

    def test_scenarios_disjoint_frequencies(self):
        g = make_grid(900, 0.0, 1.0)
        b1 = truth_bundle(SimConfig(scenario="I"), g).b_star
        b2 = truth_bundle(SimConfig(scenario="II"), g).b_star
        assert abs(inner_product(b1, b2)) < 1e-3


class TestGenDataset:
    def test_z_marginal_variance(self):
        cfg = SimConfig(family="gaussian", scenario="I", n=2000, grid_points=60, base_seed=5)
        draws = []
        for rep in range(50):
            d, _ = gen_dataset(cfg, rep)
            draws.append(d.Z[:, 0])
        var = np.var(np.concatenate(draws))
        assert abs(var - 0.2) <= 0.03 * 0.2 + 0.005

    def test_rep_streams_independent_of_order(self):
        cfg = SimConfig(n=30, grid_points=50, base_seed=9)
        d5a, _ = gen_dataset(cfg, 5)
        gen_dataset(cfg, 0)
        d5b, _ = gen_dataset(cfg, 5)
        np.testing.assert_array_equal(d5a.y, d5b.y)
        np.testing.assert_array_equal(d5a.X, d5b.X)

    def test_poisson_outcomes_integral(self):
        cfg = SimConfig(family="poisson", n=50, grid_points=80, base_seed=3)
        d, _ = gen_dataset(cfg, 0)
        assert np.all(d.y >= 0) and np.all(d.y == np.round(d.y))


class TestMseB:
    def test_zero_for_equal(self):
        g = make_grid(30, 0.0, 1.0)
        f = DiscretizedFunction(g, np.sin(g.points))
        assert mse_b(f, f) == 0.0

    def test_orthonormal_shift(self):
        g = make_grid(900, 0.0, 1.0)
        b = truth_bundle(SimConfig(scenario="I"), g).b_star
        shifted = b + cosine_basis(1, g)
        assert mse_b(shifted, b) == pytest.approx(1.0, abs=1e-4)

    def test_zero_estimate_scenario_norm(self):
        g = make_grid(900, 0.0, 1.0)
        b = truth_bundle(SimConfig(scenario="I"), g).b_star
        zero = DiscretizedFunction(g, np.zeros(900))
        assert mse_b(zero, b) == pytest.approx(25.0, abs=1e-3)


class TestRunExperiment:
    CFG = SimConfig(
        family="gaussian",
        scenario="I",
        n=50,
        reps=2,
        p_policy=("fixed", 3),
        grid_points=100,
        base_seed=11,
        methods=("rapls", "fpcr"),
    )

    def test_deterministic_records(self):
        r1 = run_experiment(self.CFG)
        r2 = run_experiment(self.CFG)
        assert format_records(r1) == format_records(r2)
        assert len(r1.records) == 4  # 2 reps x 2 methods

    def test_summary_recomputable(self):
        r = run_experiment(self.CFG)
        for method in ("rapls", "fpcr"):
            vals = [x["mse_b"] for x in r.records if x["method"] == method]
            assert r.summary[method]["mse_b"]["mean"] == pytest.approx(
                np.mean(vals), rel=1e-12
            )

    def test_formats(self):
        r = run_experiment(self.CFG)
        rec = format_records(r)
        header = rec.splitlines()[0].split("\t")
        assert header == ["rep", "method", "mse_b", "mse_alpha", "p_used", "n_iter", "converged"]
        summary = format_summary(r)
        assert "[experiment]" in summary and "[summary.rapls]" in summary

    def test_aic_policy_runs(self):
        cfg = SimConfig(
            family="gaussian", scenario="I", n=60, reps=1, p_policy=("aic", 5),
            grid_points=100, base_seed=12,
        )
        r = run_experiment(cfg)
        assert r.records[0]["p_used"] <= 5
        assert not r.failures
