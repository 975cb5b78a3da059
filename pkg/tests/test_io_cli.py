"""File-format and command-line frontend tests."""

import json
from pathlib import Path

import numpy as np
import pytest

from rapls.cli import main
from rapls.io import (
    FormatError,
    read_curves,
    read_sim_config,
    read_table,
    write_function,
)
from rapls.grids import DiscretizedFunction, make_grid

DATA = Path(__file__).resolve().parent.parent / "data"
CURVES = DATA / "toy_curves.txt"
TABLE = DATA / "toy_table.txt"
TABLE_POISSON = DATA / "toy_table_poisson.txt"


class TestIo:
    def test_read_curves(self):
        X, grid = read_curves(CURVES)
        assert X.shape == (20, 50)
        assert grid.size == 50 and grid.lo == 0.0 and grid.hi == 1.0

    def test_read_table(self):
        y, Z, names = read_table(TABLE)
        assert y.shape == (20,) and Z.shape == (20, 1) and names == ["z1"]

    def test_curve_header_errors(self, tmp_path):
        bad = tmp_path / "c.txt"
        bad.write_text("grids: 0 1 3\n1 2 3\n")
        with pytest.raises(FormatError):
            read_curves(bad)
        bad.write_text("grid: 0 1 3\n1 2\n")
        with pytest.raises(FormatError) as err:
            read_curves(bad)
        assert err.value.line == 2

    def test_table_errors(self, tmp_path):
        bad = tmp_path / "t.txt"
        bad.write_text("x z1\n1 2\n")
        with pytest.raises(FormatError):
            read_table(bad)
        bad.write_text("y z1\n1 nope\n")
        with pytest.raises(FormatError):
            read_table(bad)

    def test_write_function_roundtrip(self, tmp_path):
        g = make_grid(7, 0.0, 1.0)
        f = DiscretizedFunction(g, np.linspace(-1, 1, 7))
        out = tmp_path / "f.tsv"
        write_function(out, f)
        rows = out.read_text().splitlines()
        assert rows[0] == "s\tvalue"
        vals = np.array([float(r.split("\t")[1]) for r in rows[1:]])
        np.testing.assert_array_equal(vals, f.values)

    def test_read_sim_config(self):
        cfg = read_sim_config(DATA / "sim_quick.yaml")
        assert cfg.family == "gaussian" and cfg.n == 50
        assert cfg.p_policy == ("fixed", 3)
        assert cfg.methods == ("rapls", "fpcr")

    def test_sim_config_seed_required(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("family: gaussian\nn: 50\n")
        with pytest.raises(FormatError.__mro__[1]):  # InvalidArgumentError
            read_sim_config(p)
        assert read_sim_config(p, seed_override=5).base_seed == 5

    def test_sim_config_unknown_field(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("family: gaussian\nbase_seed: 1\nbogus: 2\n")
        from rapls.errors import InvalidArgumentError

        with pytest.raises(InvalidArgumentError):
            read_sim_config(p)


class TestCliFit:
    def test_fit_smoke(self, tmp_path):
        out = tmp_path / "run"
        code = main([
            "fit", "--curves", str(CURVES), "--table", str(TABLE),
            "--p", "2", "--out", str(out),
        ])
        assert code == 0
        b = (out / "b_hat.tsv").read_text().splitlines()
        assert len(b) == 51  # header + one row per grid point
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert str(CURVES) in manifest["inputs"]

    def test_poisson_on_gaussian_outcomes_exit2(self, tmp_path):
        code = main([
            "fit", "--curves", str(CURVES), "--table", str(TABLE),
            "--family", "poisson", "--p", "2", "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_poisson_table_fits(self, tmp_path):
        code = main([
            "fit", "--curves", str(CURVES), "--table", str(TABLE_POISSON),
            "--family", "poisson", "--p", "2", "--out", str(tmp_path / "o"),
        ])
        assert code == 0

    def test_missing_file_exit2(self, tmp_path):
        code = main([
            "fit", "--curves", str(tmp_path / "nope.txt"), "--table", str(TABLE),
            "--p", "2", "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_select_matches_library(self, tmp_path):
        from rapls.core import Dataset
        from rapls.families import GAUSSIAN
        from rapls.io import read_curves as rc, read_table as rt
        from rapls.irls import FitConfig
        from rapls.select import select_p

        out = tmp_path / "sel"
        code = main([
            "select", "--curves", str(CURVES), "--table", str(TABLE),
            "--select-p", "6", "--out", str(out),
        ])
        assert code == 0
        diag = (out / "diagnostics.txt").read_text()
        X, grid = rc(CURVES)
        y, Z, _ = rt(TABLE)
        sel = select_p(Dataset(y=y, X=X, Z=Z, grid=grid), GAUSSIAN, 6, FitConfig(p=1))
        assert f"best_p = {sel.best_p}" in diag

    def test_calibrate_writes_stderr_column(self, tmp_path):
        out = tmp_path / "cal"
        code = main([
            "calibrate", "--curves", str(CURVES), "--table", str(TABLE),
            "--p", "2", "--out", str(out),
        ])
        assert code == 0
        scalars = (out / "scalars.tsv").read_text().splitlines()
        alpha1 = scalars[2].split("\t")
        assert alpha1[0] == "alpha1" and alpha1[2] != "nan"

    def test_numerical_failure_exit3(self, tmp_path):
        # constant outcomes make the seed direction degenerate
        table = tmp_path / "const.txt"
        rows = ["y z1"] + [f"1.0 {0.1 * i:.3f}" for i in range(20)]
        table.write_text("\n".join(rows) + "\n")
        code = main([
            "fit", "--curves", str(CURVES), "--table", str(table),
            "--p", "2", "--out", str(tmp_path / "o"),
        ])
        assert code == 3


class TestCliFpca:
    def test_fpca_outputs(self, tmp_path):
        out = tmp_path / "pca"
        code = main([
            "fpca", "--curves", str(CURVES), "--n-comp", "3", "--out", str(out),
        ])
        assert code == 0
        eig = (out / "eigenvalues.tsv").read_text().splitlines()
        assert len(eig) == 4
        assert (out / "eigenfunction_3.tsv").exists()


class TestCliSimulate:
    def test_simulate_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            code = main([
                "simulate", "--config", str(DATA / "sim_quick.yaml"),
                "--out", str(out),
            ])
            assert code == 0
        assert (out1 / "records.tsv").read_text() == (out2 / "records.tsv").read_text()
        records = (out1 / "records.tsv").read_text().splitlines()
        assert len(records) == 5  # header + 2 reps x 2 methods

    def test_simulate_matches_library(self, tmp_path):
        from rapls.io import read_sim_config
        from rapls.simulate import format_records, run_experiment

        out = tmp_path / "sim"
        main(["simulate", "--config", str(DATA / "sim_quick.yaml"), "--out", str(out)])
        cfg = read_sim_config(DATA / "sim_quick.yaml")
        expect = format_records(run_experiment(cfg))
        assert (out / "records.tsv").read_text() == expect

    def test_invalid_config_exit2(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("family: gaussian\nscenario: III\nbase_seed: 1\n")
        code = main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")])
        assert code == 2
