"""Canonical exponential families: Gaussian-identity, Poisson-log, Bernoulli-logit.

Each family exposes the cumulant A and its first two derivatives, giving the
score r(y, eta) = T(y) - A'(eta), the information weight w(eta) = A''(eta),
and the IRLS pseudo-response eta + r/w. All functions are vectorized.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import gammaln

from .errors import InvalidArgumentError, InvalidOutcomeError

__all__ = [
    "ExpFamily",
    "GAUSSIAN",
    "POISSON",
    "BERNOULLI",
    "get_family",
    "DivergenceWarning",
    "loglik",
    "score",
    "info_weight",
    "pseudo_response",
]

# Clamp on the information weight before inversion in the pseudo-response;
# Bernoulli weights vanish at extreme eta.
WEIGHT_FLOOR = 1e-8

# Poisson linear predictors beyond this (e^30 ~ 1e13) flag divergence.
POISSON_ETA_CAP = 30.0


class DivergenceWarning(RuntimeWarning):
    """Linear predictor left the family's numerically safe range."""


class ExpFamily:
    kind: str

    def log_base(self, y):
        """log h(y)."""
        raise NotImplementedError

    def sufficient(self, y):
        """T(y)."""
        return np.asarray(y, dtype=float)

    def cumulant(self, eta):
        raise NotImplementedError

    def cumulant_d1(self, eta):
        raise NotImplementedError

    def cumulant_d2(self, eta):
        raise NotImplementedError

    def mean(self, eta):
        return self.cumulant_d1(eta)

    def check_support(self, y) -> None:
        """Raise InvalidOutcomeError if any outcome is outside the support."""

    def __repr__(self):
        return f"ExpFamily({self.kind})"


class _Gaussian(ExpFamily):
    kind = "gaussian"

    def log_base(self, y):
        y = np.asarray(y, dtype=float)
        return -0.5 * y**2 - 0.5 * np.log(2.0 * np.pi)

    def cumulant(self, eta):
        eta = np.asarray(eta, dtype=float)
        return 0.5 * eta**2

    def cumulant_d1(self, eta):
        return np.asarray(eta, dtype=float)

    def cumulant_d2(self, eta):
        return np.ones_like(np.asarray(eta, dtype=float))

    def check_support(self, y):
        if not np.all(np.isfinite(y)):
            raise InvalidOutcomeError("gaussian outcomes must be finite")


class _Poisson(ExpFamily):
    kind = "poisson"

    def log_base(self, y):
        y = np.asarray(y, dtype=float)
        return -gammaln(y + 1.0)

    def _exp(self, eta):
        # honest evaluation: overflow goes to inf and is handled by callers;
        # leaving the safe range is flagged, not silently truncated
        eta = np.asarray(eta, dtype=float)
        if np.any(eta > POISSON_ETA_CAP):
            warnings.warn(
                "Poisson linear predictor exceeds the safe range (eta > 30)",
                DivergenceWarning,
                stacklevel=3,
            )
        with np.errstate(over="ignore"):
            return np.exp(eta)

    def cumulant(self, eta):
        return self._exp(eta)

    def cumulant_d1(self, eta):
        return self._exp(eta)

    def cumulant_d2(self, eta):
        return self._exp(eta)

    def check_support(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(y != np.round(y)):
            raise InvalidOutcomeError("poisson outcomes must be nonnegative integers")


class _Bernoulli(ExpFamily):
    kind = "bernoulli"

    def log_base(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def cumulant(self, eta):
        # log(1 + e^eta), overflow-safe
        eta = np.asarray(eta, dtype=float)
        return np.logaddexp(0.0, eta)

    def cumulant_d1(self, eta):
        eta = np.asarray(eta, dtype=float)
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-eta))

    def cumulant_d2(self, eta):
        mu = self.cumulant_d1(eta)
        return mu * (1.0 - mu)

    def check_support(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise InvalidOutcomeError("bernoulli outcomes must be 0 or 1")


GAUSSIAN = _Gaussian()
POISSON = _Poisson()
BERNOULLI = _Bernoulli()

_FAMILIES = {f.kind: f for f in (GAUSSIAN, POISSON, BERNOULLI)}


def get_family(kind: str) -> ExpFamily:
    try:
        return _FAMILIES[kind]
    except KeyError:
        raise InvalidArgumentError(f"unknown family {kind!r}") from None


def loglik(fam: ExpFamily, y, eta):
    """Log-density log h(y) + eta T(y) - A(eta). Gaussian uses unit dispersion."""
    fam.check_support(y)
    y = np.asarray(y, dtype=float)
    return fam.log_base(y) + np.asarray(eta, dtype=float) * fam.sufficient(y) - fam.cumulant(eta)


def score(fam: ExpFamily, y, eta):
    """Score in eta: T(y) - A'(eta)."""
    fam.check_support(y)
    return fam.sufficient(y) - fam.cumulant_d1(eta)


def info_weight(fam: ExpFamily, eta):
    """Fisher information in eta, clamped below at WEIGHT_FLOOR."""
    return np.maximum(fam.cumulant_d2(eta), WEIGHT_FLOOR)


def pseudo_response(fam: ExpFamily, y, eta):
    """IRLS working response eta + w(eta)^{-1} r(y, eta) with the clamped weight."""
    eta = np.asarray(eta, dtype=float)
    return eta + score(fam, y, eta) / info_weight(fam, eta)
