"""AIC computation and component-count selection shared by RAPLS and FPCR."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Dataset, PflmContext, RaplsFit, fit_pflm
from .errors import (
    IllConditionedGramError,
    InvalidArgumentError,
    InvalidFitError,
    RankDeficientError,
    RaplsError,
    SelectionFailureError,
)
from .families import ExpFamily
from .fpcr import fit_fpcr
from .irls import FitConfig, fit_gflm

__all__ = ["SelectionResult", "aic", "select_p"]


@dataclass
class SelectionResult:
    best_p: int
    aic_curve: list  # (p, aic) pairs, ascending in p
    fits_considered: int
    best_fit: Optional[RaplsFit] = field(default=None, repr=False)
    errors: dict = field(default_factory=dict, repr=False)


def aic(fit: RaplsFit, d: Dataset, fam: ExpFamily) -> float:
    """-2 loglik + 2 df, with df = p + q + 1 and one extra for the profiled
    Gaussian variance."""
    if not fit.converged:
        raise InvalidFitError("AIC requires a converged fit")
    df = fit.p + d.q + (2 if fam.kind == "gaussian" else 1)
    return float(-2.0 * fit.loglik + 2.0 * df)


def _fit_one(d, fam, p, cfg, method, ctx):
    if method == "fpcr":
        return fit_fpcr(d, fam, p, cfg)
    if fam.kind == "gaussian" and cfg.init == "deterministic":
        return fit_pflm(d, p, beta_variant=cfg.beta_variant, ctx=ctx)
    sub = FitConfig(
        p=p,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
        init=cfg.init,
        seed=cfg.seed,
        init_values=cfg.init_values,
        beta_variant=cfg.beta_variant,
        weighted_cov=cfg.weighted_cov,
    )
    return fit_gflm(d, fam, sub, ctx=ctx)


def select_p(
    d: Dataset,
    fam: ExpFamily,
    p_max: int,
    cfg: FitConfig,
    method: str = "rapls",
) -> SelectionResult:
    """Fit p = 1..p_max and return the argmin-AIC count (smallest-p ties).

    The range is truncated at the first ill-conditioned Gram system (RAPLS)
    or rank deficiency (FPCR); other failures are recorded per p. Every p is
    fitted fresh, so the result does not depend on sweep order.
    """
    if p_max < 1:
        raise InvalidArgumentError("p_max must be >= 1")
    if method not in ("rapls", "fpcr"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    fam.check_support(d.y)
    ctx = PflmContext(d) if method == "rapls" else None

    curve = []
    errors = {}
    best = None
    for p in range(1, p_max + 1):
        try:
            fit = _fit_one(d, fam, p, cfg, method, ctx)
        except (IllConditionedGramError, RankDeficientError) as exc:
            errors[p] = exc
            break
        except RaplsError as exc:
            errors[p] = exc
            continue
        value = aic(fit, d, fam)
        curve.append((p, value))
        if best is None or value < best[1]:
            best = (p, value, fit)

    if best is None:
        raise SelectionFailureError(
            "no component count could be fitted", per_p_errors=errors
        )
    return SelectionResult(
        best_p=best[0],
        aic_curve=curve,
        fits_considered=len(curve),
        best_fit=best[2],
        errors=errors,
    )
