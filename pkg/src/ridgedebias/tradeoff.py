"""Bias-variance decomposition of the k-step de-biased estimator.

With ``delta = U1' beta`` and ``r_i = lam / (d_i^2 + lam)``::

    bias^2(k)   = sum_i delta_i^2 r_i^(2(k+1))          (+ ||U2 U2' beta||^2 if rank < p)
    variance(k) = sigma^2 sum_i (1 - r_i^(k+1))^2 / d_i^2

The minimising k is found by exhaustive scan. The closed-form bracket
``[floor(k1), floor(k2)]`` is reported only as a diagnostic; it is derived from
a continuous-k argument and can disagree with the discrete argmin.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DataError, ModelError
from .spectral import SpectralCache, filter_gain

Regime = Literal["decreasing", "interior-minimum", "increasing"]

K_CAP = 5000


@dataclass(frozen=True)
class MseDecomposition:
    ks: np.ndarray
    bias_sq: np.ndarray
    variance: np.ndarray
    total: np.ndarray
    argmin_k: int
    regime: Regime
    crossover_interval: tuple[int, int] | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "bias_sq", "variance", "total"])
        for row in zip(self.ks, self.bias_sq, self.variance, self.total):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "argmin_k": self.argmin_k,
            "regime": self.regime,
            "k_max": int(self.ks[-1]),
            "crossover_interval": list(self.crossover_interval) if self.crossover_interval else None,
            "rows": [
                {"k": int(k), "bias_sq": float(b), "variance": float(v), "total": float(t)}
                for k, b, v, t in zip(self.ks, self.bias_sq, self.variance, self.total)
            ],
        }


def _curves(r, d2, delta2, offset, sigma, ks):
    powers = np.exp(np.outer(ks + 1, np.log(r)))  # (len(ks), rank)
    bias_sq = (powers**2) @ delta2 + offset
    gain = -np.expm1(np.outer(ks + 1, np.log(r)))
    variance = sigma**2 * ((gain**2) @ (1.0 / d2))
    return bias_sq, variance


def _signs(diffs: np.ndarray, scale: float) -> np.ndarray:
    s = np.sign(diffs)
    s[np.abs(diffs) <= 1e-15 * scale] = 0
    return s


def _classify(total: np.ndarray) -> Regime:
    s = _signs(np.diff(total), float(np.max(np.abs(total))) if total.size else 0.0)
    if np.all(s <= 0):
        return "decreasing"
    if np.all(s >= 0):
        return "increasing"
    return "interior-minimum"


def direction_ratios(cache: SpectralCache, beta_true: np.ndarray, sigma: float) -> np.ndarray:
    """Signal-to-noise per singular direction, ``delta_i^2 d_i^2 / sigma^2``."""
    delta = cache.u1.T @ beta_true
    with np.errstate(divide="ignore"):
        return delta**2 * cache.d1**2 / sigma**2


def crossover_k_values(cache: SpectralCache, beta_true: np.ndarray, lam: float, sigma: float) -> np.ndarray:
    """``log(1 - ratio_i) / log(r_i) - 1`` per direction; NaN where ratio_i >= 1."""
    ratio = direction_ratios(cache, beta_true, sigma)
    r = cache.ratios(lam)
    out = np.full(ratio.shape, np.nan)
    ok = ratio < 1
    out[ok] = np.log1p(-ratio[ok]) / np.log(r[ok]) - 1.0
    return out


def mse_curve(
    cache: SpectralCache,
    beta_true: np.ndarray,
    lam: float,
    sigma: float,
    k_max: int = 200,
    extend: bool = True,
) -> MseDecomposition:
    """Exact MSE of the k-step estimator for k = 0..k_max.

    With ``extend`` the grid doubles (up to 5000) while the last two
    successive differences disagree in sign, so a turning point at the edge
    of the grid is not mistaken for the end of the curve.
    """
    if int(k_max) != k_max or k_max < 1:
        raise ModelError(f"k_max must be a positive integer, got {k_max}")
    if not lam > 0:
        raise ModelError(f"lambda must be positive, got {lam}")
    if sigma < 0:
        raise ModelError(f"sigma must be non-negative, got {sigma}")
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_true.shape != (cache.p,):
        raise DataError(f"beta must have length {cache.p}, got {beta_true.shape}")
    delta = cache.u1.T @ beta_true
    offset = float(np.sum((beta_true - cache.u1 @ delta) ** 2))
    r = cache.ratios(lam)
    d2 = cache.d1**2
    k_max = int(k_max)
    while True:
        ks = np.arange(k_max + 1)
        bias_sq, variance = _curves(r, d2, delta**2, offset, sigma, ks)
        total = bias_sq + variance
        if not extend or k_max >= K_CAP or k_max < 2:
            break
        tail = _signs(np.diff(total[-3:]), float(np.max(np.abs(total))))
        if tail[0] == tail[1]:
            break
        k_max = min(2 * k_max, K_CAP)
    kv = crossover_k_values(cache, beta_true, lam, sigma)
    interval = None
    if kv.size and np.all(np.isfinite(kv)):
        interval = (math.floor(kv.min()), math.floor(kv.max()))
    return MseDecomposition(
        ks=ks,
        bias_sq=bias_sq,
        variance=variance,
        total=total,
        argmin_k=int(np.argmin(total)),
        regime=_classify(total),
        crossover_interval=interval,
    )


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    argmin_k: int
    ratios: np.ndarray = field(repr=False)
    crossover_k: np.ndarray = field(repr=False)
    crossover_interval: tuple[int, int] | None
    all_ratios_above_one: bool
    curve: MseDecomposition = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "argmin_k": self.argmin_k,
            "ratios": self.ratios.tolist(),
            "crossover_k": [None if math.isnan(v) else float(v) for v in self.crossover_k],
            "crossover_interval": list(self.crossover_interval) if self.crossover_interval else None,
            "all_ratios_above_one": self.all_ratios_above_one,
        }


def regime_classify(
    cache: SpectralCache,
    beta_true: np.ndarray,
    lam: float,
    sigma: float,
    k_max: int = 200,
) -> RegimeReport:
    """Classify the MSE path as decreasing, interior-minimum or increasing over the scanned grid."""
    curve = mse_curve(cache, beta_true, lam, sigma, k_max)
    ratios = direction_ratios(cache, beta_true, sigma)
    return RegimeReport(
        regime=curve.regime,
        argmin_k=curve.argmin_k,
        ratios=ratios,
        crossover_k=crossover_k_values(cache, beta_true, lam, sigma),
        crossover_interval=curve.crossover_interval,
        all_ratios_above_one=bool(np.all(ratios > 1)),
        curve=curve,
    )


def variance_trace(cache: SpectralCache, lam: float, sigma: float, k: int) -> float:
    """``sigma^2 sum_i (1 - r_i^(k+1))^2 / d_i^2``."""
    g = filter_gain(cache.ratios(lam), k)
    return float(sigma**2 * np.sum(g**2 / cache.d1**2))
