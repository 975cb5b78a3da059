"""Residual-based alternative partial least squares for generalized
functional linear models, with a calibrated scalar-coefficient estimator,
an FPCR baseline, AIC component selection, and a Monte-Carlo harness."""

__version__ = "0.1.0"

from .calibrate import CalibratedFit, ThetaEstimate, calibrated_alpha, default_s_n, estimate_theta, zeta_residuals
from .core import (
    Dataset,
    GramSystem,
    RaplsBasis,
    RaplsFit,
    fit_pflm,
    gram_system,
    krylov_basis,
    seed_direction,
    solve_coefficients,
)
from .errors import RaplsError
from .estimators import FpcrEstimator, RaplsEstimator
from .families import BERNOULLI, GAUSSIAN, POISSON, ExpFamily, get_family
from .fpcr import EigenSystem, fit_fpcr, fpca
from .grids import (
    DiscretizedFunction,
    Grid,
    KernelMatrix,
    apply_kernel,
    cosine_basis,
    inner_product,
    make_grid,
)
from .irls import FitConfig, fit_gflm, solve_alpha_score
from .residual import Annihilator, build_annihilator, residual_cov
from .select import SelectionResult, aic, select_p
from .simulate import (
    ExperimentResult,
    SimConfig,
    TruthBundle,
    gen_curves,
    gen_dataset,
    mse_b,
    run_experiment,
)

__all__ = [
    "__version__",
    "Annihilator",
    "BERNOULLI",
    "CalibratedFit",
    "Dataset",
    "DiscretizedFunction",
    "EigenSystem",
    "ExpFamily",
    "ExperimentResult",
    "FitConfig",
    "FpcrEstimator",
    "GAUSSIAN",
    "GramSystem",
    "Grid",
    "KernelMatrix",
    "POISSON",
    "RaplsBasis",
    "RaplsError",
    "RaplsEstimator",
    "RaplsFit",
    "SelectionResult",
    "SimConfig",
    "ThetaEstimate",
    "TruthBundle",
    "aic",
    "apply_kernel",
    "build_annihilator",
    "calibrated_alpha",
    "cosine_basis",
    "default_s_n",
    "estimate_theta",
    "fit_fpcr",
    "fit_gflm",
    "fit_pflm",
    "fpca",
    "gen_curves",
    "gen_dataset",
    "get_family",
    "gram_system",
    "inner_product",
    "krylov_basis",
    "make_grid",
    "mse_b",
    "residual_cov",
    "run_experiment",
    "seed_direction",
    "select_p",
    "solve_alpha_score",
    "solve_coefficients",
    "zeta_residuals",
]
