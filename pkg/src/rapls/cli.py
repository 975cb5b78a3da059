"""Command-line frontend.

Subcommands: fit, select, calibrate, fpca, simulate. Exit codes: 0 on
success, 2 on malformed input, 3 on a numerical failure (the typed error
name is printed to stderr).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calibrate import calibrated_alpha, default_s_n, estimate_theta
from .core import Dataset, fit_pflm
from .errors import RaplsError
from .families import get_family
from .fpcr import fpca
from .grids import DiscretizedFunction
from .io import FormatError, RunManifest, read_curves, read_sim_config, read_table, write_function
from .irls import FitConfig, fit_gflm
from .select import select_p
from .simulate import format_records, format_summary, run_experiment

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _add_data_args(p):
    p.add_argument("--curves", required=True, help="curve matrix file")
    p.add_argument("--table", required=True, help="outcome/covariate table file")
    p.add_argument("--family", default="gaussian", choices=["gaussian", "poisson", "bernoulli"])


def _add_fit_args(p):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--p", type=int, help="fixed number of components")
    group.add_argument("--select-p", type=int, help="AIC sweep up to this count")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--init", default="deterministic", choices=["deterministic", "random"])
    p.add_argument("--seed", type=int, help="seed for random initialization")
    p.add_argument("--beta-variant", default="population", choices=["population", "literal"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rapls")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a (generalized) functional linear model")
    _add_data_args(p_fit)
    _add_fit_args(p_fit)
    p_fit.add_argument("--calibrate", action="store_true")
    p_fit.add_argument("--out", required=True)

    p_sel = sub.add_parser("select", help="AIC component-count sweep")
    _add_data_args(p_sel)
    _add_fit_args(p_sel)
    p_sel.add_argument("--out", required=True)

    p_cal = sub.add_parser("calibrate", help="fit and calibrate the scalar coefficients")
    _add_data_args(p_cal)
    _add_fit_args(p_cal)
    p_cal.add_argument("--out", required=True)

    p_pca = sub.add_parser("fpca", help="functional principal component analysis")
    p_pca.add_argument("--curves", required=True)
    p_pca.add_argument("--n-comp", type=int, required=True)
    p_pca.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo experiment")
    p_sim.add_argument("--config", required=True, help="simulation config file")
    p_sim.add_argument("--reps", type=int, help="override the configured replications")
    p_sim.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument("--out", required=True)
    return parser


def _load_dataset(args) -> Dataset:
    X, grid = read_curves(args.curves)
    y, Z, _ = read_table(args.table)
    if len(y) != X.shape[0]:
        raise FormatError(args.table, 1, "table and curve matrix disagree on n")
    return Dataset(y=y, X=X, Z=Z, grid=grid)


def _fit(args, d: Dataset):
    fam = get_family(args.family)
    cfg = FitConfig(
        p=args.p or 1,
        tol=args.tol,
        max_iter=args.max_iter,
        init=args.init,
        seed=args.seed,
        beta_variant=args.beta_variant,
    )
    if args.select_p:
        sel = select_p(d, fam, args.select_p, cfg, method="rapls")
        return sel.best_fit, fam, sel
    if fam.kind == "gaussian" and args.init == "deterministic":
        return fit_pflm(d, args.p, beta_variant=args.beta_variant), fam, None
    return fit_gflm(d, fam, cfg), fam, None


def _write_scalars(path, fit, cal=None):
    lines = ["name\testimate\tstderr"]
    lines.append(f"alpha0\t{fit.alpha0:.17g}\tnan")
    for k, a in enumerate(fit.alpha, start=1):
        se = f"{cal.std_errors[k-1]:.17g}" if cal is not None else "nan"
        est = cal.alpha_cal[k - 1] if cal is not None else a
        lines.append(f"alpha{k}\t{est:.17g}\t{se}")
    Path(path).write_text("\n".join(lines) + "\n")


def _write_diagnostics(path, fit, sel=None):
    lines = [
        f"p = {fit.p}",
        f"n_iter = {fit.n_iter}",
        f"converged = {str(fit.converged).lower()}",
        f"loglik = {fit.loglik:.17g}",
        f"aic = {fit.aic:.17g}",
    ]
    if sel is not None:
        lines.append(f"best_p = {sel.best_p}")
        for p, value in sel.aic_curve:
            lines.append(f"aic[{p}] = {value:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_fit(args, calibrate_always=False) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(args.command, {k: v for k, v in vars(args).items() if k != "command"})
    manifest.add_input(args.curves)
    manifest.add_input(args.table)
    d = _load_dataset(args)
    fit, fam, sel = _fit(args, d)
    cal = None
    if (calibrate_always or getattr(args, "calibrate", False)) and d.q:
        th = estimate_theta(d, fit, fam, default_s_n(d.n))
        cal = calibrated_alpha(d, fam, fit, th)
    write_function(out / "b_hat.tsv", fit.b_hat)
    manifest.add_output(out / "b_hat.tsv")
    _write_scalars(out / "scalars.tsv", fit, cal)
    manifest.add_output(out / "scalars.tsv")
    _write_diagnostics(out / "diagnostics.txt", fit, sel)
    manifest.add_output(out / "diagnostics.txt")
    manifest.write(out / "manifest.json")
    return EXIT_OK


def cmd_select(args) -> int:
    if not args.select_p:
        raise FormatError("<args>", 0, "select requires --select-p")
    return cmd_fit(args)


def cmd_calibrate(args) -> int:
    return cmd_fit(args, calibrate_always=True)


def cmd_fpca(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(args.command, {k: v for k, v in vars(args).items() if k != "command"})
    manifest.add_input(args.curves)
    X, grid = read_curves(args.curves)
    es = fpca(X, grid, args.n_comp)
    lines = ["component\teigenvalue"]
    for j, lam in enumerate(es.eigenvalues, start=1):
        lines.append(f"{j}\t{lam:.17g}")
    (out / "eigenvalues.tsv").write_text("\n".join(lines) + "\n")
    manifest.add_output(out / "eigenvalues.tsv")
    F = np.stack([f.values for f in es.eigenfunctions])
    for j, row in enumerate(F, start=1):
        path = out / f"eigenfunction_{j}.tsv"
        write_function(path, DiscretizedFunction(grid, row))
        manifest.add_output(path)
    manifest.write(out / "manifest.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = read_sim_config(args.config, seed_override=args.seed)
    if args.reps:
        cfg = replace(cfg, reps=args.reps)
    manifest = RunManifest(args.command, {k: v for k, v in vars(args).items() if k != "command"})
    manifest.add_input(args.config)
    result = run_experiment(cfg, threads=max(args.threads, 1))
    (out / "records.tsv").write_text(format_records(result))
    manifest.add_output(out / "records.tsv")
    (out / "summary.txt").write_text(format_summary(result))
    manifest.add_output(out / "summary.txt")
    manifest.write(out / "manifest.json")
    return EXIT_OK


_DISPATCH = {
    "fit": cmd_fit,
    "select": cmd_select,
    "calibrate": cmd_calibrate,
    "fpca": cmd_fpca,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (FormatError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RaplsError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        # argument/outcome validation is an input problem, not a numerical one
        return EXIT_INPUT if isinstance(exc, ValueError) else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
