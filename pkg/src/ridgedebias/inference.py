"""Finite-k covariance, contrast tests and normal-theory intervals for de-biased fits.

The covariance of the k-step estimator is
``G X' Sigma_eps X G`` with ``G = u1 diag((1 - r^(k+1)) / d^2) u1'``; under
homoskedastic noise it reduces to ``sigma^2 u1 diag((1 - r^(k+1))^2 / d^2) u1'``.
Interval routines plug in the residual scale stored on the fit and use
normal quantiles throughout.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Literal, Union

import numpy as np
from scipy.stats import norm

from .errors import DataError, ModelError, NonEstimableContrast
from .screening import TwoStageFit
from .spectral import DebiasedFit, SpectralCache, filter_gain


@dataclass(frozen=True)
class CovarianceModel:
    """Noise covariance: ``sigma^2 I`` or ``diag(variances)``."""

    kind: Literal["homoskedastic", "diagonal"]
    sigma: float | None = None
    variances: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "homoskedastic":
            if self.sigma is None or not np.isfinite(self.sigma) or self.sigma < 0:
                raise ModelError(f"sigma must be finite and non-negative, got {self.sigma}")
        elif self.kind == "diagonal":
            v = np.asarray(self.variances, dtype=float)
            if v.ndim != 1 or not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ModelError("diagonal variances must be a vector of finite positive values")
            object.__setattr__(self, "variances", v)
        else:
            raise ModelError(f"unknown covariance kind {self.kind!r}")

    @classmethod
    def homoskedastic(cls, sigma: float) -> "CovarianceModel":
        return cls("homoskedastic", sigma=float(sigma))

    @classmethod
    def diagonal(cls, variances) -> "CovarianceModel":
        return cls("diagonal", variances=np.asarray(variances, dtype=float))


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    se: float
    lower: float
    upper: float
    level: float
    kind: Literal["confidence", "prediction"]
    degenerate: bool = False  # zero standard error

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class ContrastTest:
    estimate: float
    se: float
    z: float
    p_value: float


def z_quantile(level: float) -> float:
    """Two-sided critical value ``z_{alpha/2}`` for confidence ``level``."""
    if not 0 < level < 1:
        raise ModelError(f"level must lie in (0, 1), got {level}")
    return float(norm.ppf(0.5 + level / 2.0))


def _spectral_core(cache: SpectralCache, lam: float, k: int, cov: CovarianceModel) -> np.ndarray:
    """Covariance in the u1 basis (rank x rank)."""
    gain = filter_gain(cache.ratios(lam), k)
    if cov.kind == "homoskedastic":
        return np.diag(cov.sigma**2 * gain**2 / cache.d1**2)
    if cov.variances.shape != (cache.n,):
        raise DataError(f"diagonal variances must have length {cache.n}, got {cov.variances.shape}")
    # G X' S X G = u1 diag(g d) (v1' S v1) diag(g d) u1',  g d = gain / d
    m = (cache.v1 * cov.variances[:, None]).T @ cache.v1
    w = gain / cache.d1
    return w[:, None] * m * w[None, :]


def covariance_debiased(cache: SpectralCache, lam: float, k: int, cov: CovarianceModel) -> np.ndarray:
    """p x p covariance of the k-step de-biased estimator."""
    if int(k) != k or k < 0:
        raise ModelError(f"k must be a non-negative integer, got {k}")
    core = _spectral_core(cache, lam, int(k), cov)
    out = cache.u1 @ core @ cache.u1.T
    return 0.5 * (out + out.T)


def quadratic_form(cache: SpectralCache, lam: float, k: int, cov: CovarianceModel, v: np.ndarray) -> float:
    """``v' Sigma_k v`` without forming the p x p matrix."""
    a = cache.u1.T @ np.asarray(v, dtype=float)
    core = _spectral_core(cache, lam, int(k), cov)
    return float(max(a @ core @ a, 0.0))


def _unwrap(fit, cache):
    """Return (DebiasedFit, cache, selected indices or None)."""
    if isinstance(fit, TwoStageFit):
        rc = fit.selection.restricted_cache
        if cache is not None and cache.cache_id != rc.cache_id:
            raise DataError("cache does not match the restricted design of the two-stage fit")
        return fit.fit, rc, fit.selection.indices
    if cache is None:
        raise DataError("a SpectralCache is required for a single-stage fit")
    if fit.cache_id != cache.cache_id:
        raise DataError("fit was not computed from this cache")
    return fit, cache, None


def _covariate(x0, p_full: int, idx) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (p_full,):
        raise DataError(f"covariate vector must have length {p_full}, got {x0.shape}")
    return x0 if idx is None else x0[idx]


def contrast_test(
    fit: DebiasedFit,
    cache: SpectralCache,
    theta: np.ndarray,
    null_value: float = 0.0,
    cov: CovarianceModel | None = None,
) -> ContrastTest:
    """Wald test of ``theta' beta = null_value``; the noise scale defaults to ``fit.sigma_hat``."""
    fit, cache, _ = _unwrap(fit, cache)
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape != (cache.p,):
        raise DataError(f"theta must have length {cache.p}, got {theta.shape}")
    if not np.any(theta):
        raise NonEstimableContrast("theta is the zero vector")
    cov = cov or CovarianceModel.homoskedastic(fit.sigma_hat)
    if np.linalg.norm(cache.u1.T @ theta) <= 1e-12 * np.linalg.norm(theta):
        raise NonEstimableContrast("theta is orthogonal to the row space of X")
    se = np.sqrt(quadratic_form(cache, fit.lam, fit.k_used, cov, theta))
    if se == 0.0:
        raise NonEstimableContrast("contrast has zero standard error")
    est = float(theta @ fit.beta)
    z = (est - null_value) / se
    return ContrastTest(est, float(se), float(z), float(2.0 * norm.sf(abs(z))))


def _interval(point, var_est, extra, level, kind) -> IntervalEstimate:
    z = z_quantile(level)
    se = float(np.sqrt(var_est + extra))
    return IntervalEstimate(
        point=float(point),
        se=se,
        lower=float(point - z * se),
        upper=float(point + z * se),
        level=float(level),
        kind=kind,
        degenerate=se == 0.0,
    )


def confidence_interval(
    fit: DebiasedFit | TwoStageFit,
    cache: SpectralCache | None,
    x0: np.ndarray,
    level: float = 0.95,
    cov: CovarianceModel | None = None,
) -> IntervalEstimate:
    """Interval for the mean response ``x0' beta`` centred at ``x0' beta_hat_k``."""
    base, c, idx = _unwrap(fit, cache)
    x0 = _covariate(x0, fit.selection.p if idx is not None else c.p, idx)
    cov = cov or CovarianceModel.homoskedastic(base.sigma_hat)
    var = quadratic_form(c, base.lam, base.k_used, cov, x0)
    return _interval(x0 @ base.beta, var, 0.0, level, "confidence")


def prediction_interval(
    fit: DebiasedFit | TwoStageFit,
    cache: SpectralCache | None,
    x0: np.ndarray,
    level: float = 0.95,
    cov: CovarianceModel | None = None,
) -> IntervalEstimate:
    """Interval for a new response at ``x0``: adds ``sigma_hat^2`` to the estimation variance.

    For a :class:`TwoStageFit`, ``x0`` is given on all p covariates and is
    restricted to the screened ones internally.
    """
    base, c, idx = _unwrap(fit, cache)
    x0 = _covariate(x0, fit.selection.p if idx is not None else c.p, idx)
    cov = cov or CovarianceModel.homoskedastic(base.sigma_hat)
    var = quadratic_form(c, base.lam, base.k_used, cov, x0)
    return _interval(x0 @ base.beta, var, base.sigma_hat**2, level, "prediction")


INTERVAL_FIELDS = ("x0_id", "point", "se", "lower", "upper", "level", "kind")


def intervals_to_csv(intervals: Iterable[tuple[Union[int, str], IntervalEstimate]], fh=None) -> str | None:
    """Write ``(x0_id, interval)`` pairs as CSV; returns the text when ``fh`` is None."""
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(INTERVAL_FIELDS)
    for x0_id, iv in intervals:
        w.writerow([x0_id, repr(iv.point), repr(iv.se), repr(iv.lower), repr(iv.upper), iv.level, iv.kind])
    return fh.getvalue() if own else None
