"""Ridge and iteratively de-biased ridge estimators through one thin SVD.

Writing ``X = V1 diag(d) U1'`` (``V1`` left, ``U1`` right singular vectors),
every estimator here is a spectral filter applied to ``X'y``::

    ridge            u1 diag(1 / (d^2 + lam))        u1' X'y
    de-biased, k     u1 diag((1 - r^(k+1)) / d^2)    u1' X'y,   r = lam / (d^2 + lam)
    least squares    u1 diag(1 / d^2)                u1' X'y

The de-biased filter is the closed form of the geometric sum
``sum_{j=0..k} lam^j / (d^2 + lam)^(j+1)``, so ``k`` correction steps cost
O(p*) once the SVD is available. The orthogonal complement of ``U1`` is
never formed; projections onto it are computed as ``v - U1 (U1' v)``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .dataset import Dataset
from .errors import DataError, ModelError

DEFAULT_RANK_TOL = 1e-12
DEFAULT_ETA = 1e-2
DEFAULT_MAX_ITER = 10_000

IterSpec = Union[int, str]


def _digest(*arrays: np.ndarray) -> str:
    h = hashlib.blake2b(digest_size=8)
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=float)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.flags.writeable:
        a = a.copy()
        a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralCache:
    """Truncated SVD of a design together with the response-dependent products.

    ``u1`` is p x rank, ``v1`` is n x rank, ``d1`` holds the retained singular
    values in decreasing order. ``vty = v1' y`` and ``xty = X' y``.
    """

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    u1: np.ndarray = field(repr=False)
    d1: np.ndarray
    v1: np.ndarray = field(repr=False)
    xty: np.ndarray = field(repr=False)
    vty: np.ndarray = field(repr=False)
    rank_tol: float
    design_id: str
    cache_id: str

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def rank(self) -> int:
        return self.d1.shape[0]

    def ratios(self, lam: float) -> np.ndarray:
        """Per-direction shrinkage ratios ``lam / (d_i^2 + lam)``."""
        return lam / (self.d1**2 + lam)

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the row space of X (span of ``u1``)."""
        return self.u1 @ (self.u1.T @ v)

    def complement(self, v: np.ndarray) -> np.ndarray:
        """Component of ``v`` orthogonal to the row space of X."""
        v = np.asarray(v, dtype=float)
        return v - self.project(v)

    def with_response(self, y: np.ndarray) -> "SpectralCache":
        """Reuse the decomposition for a new response vector of the same length."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise DataError(f"response must have length {self.n}, got shape {y.shape}")
        y = _readonly(y)
        return SpectralCache(
            x=self.x,
            y=y,
            u1=self.u1,
            d1=self.d1,
            v1=self.v1,
            xty=self.x.T @ y,
            vty=self.v1.T @ y,
            rank_tol=self.rank_tol,
            design_id=self.design_id,
            cache_id=f"{self.design_id}-{_digest(y)}",
        )

    def restrict(self, columns: np.ndarray) -> "SpectralCache":
        """Decompose the sub-design made of the given columns, same response."""
        return decompose_arrays(self.x[:, np.asarray(columns, dtype=int)], self.y, self.rank_tol)


def decompose_arrays(x: np.ndarray, y: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> SpectralCache:
    x = _readonly(np.atleast_2d(np.asarray(x, dtype=float)))
    y = _readonly(np.asarray(y, dtype=float))
    if y.shape != (x.shape[0],):
        raise DataError(f"x has {x.shape[0]} rows but y has shape {y.shape}")
    if rank_tol <= 0:
        raise ModelError("rank_tol must be positive")
    left, s, right_t = np.linalg.svd(x, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ModelError("design matrix is all zeros (rank 0)")
    rank = int(np.sum(s > rank_tol * s[0]))
    u1 = right_t[:rank].T
    v1 = left[:, :rank]
    # deterministic signs: largest-magnitude entry of each right singular vector is positive
    pivots = np.argmax(np.abs(u1), axis=0)
    signs = np.sign(u1[pivots, np.arange(rank)])
    u1 = _readonly(u1 * signs)
    v1 = _readonly(v1 * signs)
    design_id = _digest(x)
    return SpectralCache(
        x=x,
        y=y,
        u1=u1,
        d1=_readonly(s[:rank]),
        v1=v1,
        xty=_readonly(x.T @ y),
        vty=_readonly(v1.T @ y),
        rank_tol=float(rank_tol),
        design_id=design_id,
        cache_id=f"{design_id}-{_digest(y)}",
    )


def decompose(d: Dataset, rank_tol: float = DEFAULT_RANK_TOL) -> SpectralCache:
    """SVD of ``d.x`` truncated at ``rank_tol * d_1``.

    The estimators assume an intercept-free model; center the dataset first
    when the data carry an intercept.
    """
    return decompose_arrays(d.x, d.y, rank_tol)


def parse_lambda(rule: str | float, n: int) -> float:
    """Resolve a penalty given as an absolute value or as a multiple of n ("0.3n")."""
    if isinstance(rule, (int, float)):
        lam = float(rule)
    else:
        text = str(rule).strip().replace(" ", "")
        m = re.fullmatch(r"([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\*?n", text)
        if m:
            lam = float(m.group(1)) * n
        else:
            try:
                lam = float(text)
            except ValueError:
                raise DataError(f"cannot parse penalty {rule!r}; use a number or a rule like '0.3n'") from None
    if not np.isfinite(lam) or lam <= 0:
        raise DataError(f"penalty must be positive, got {rule!r}")
    return lam


@dataclass(frozen=True)
class RidgeConfig:
    """Penalty and number of correction steps.

    ``k`` is a non-negative integer or ``"auto"``; in auto mode the smallest
    k with ``||beta_k - beta_{k-1}||_2 <= eta`` is used, capped at ``max_iter``.
    """

    lam: float
    k: IterSpec = 0
    eta: float = DEFAULT_ETA
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ModelError(f"lambda must be positive, got {self.lam}")
        if isinstance(self.k, str):
            if self.k != "auto":
                raise ModelError(f"k must be a non-negative integer or 'auto', got {self.k!r}")
            if not self.eta > 0:
                raise ModelError(f"eta must be positive, got {self.eta}")
            if int(self.max_iter) != self.max_iter or self.max_iter < 1:
                raise ModelError(f"max_iter must be a positive integer, got {self.max_iter}")
        elif int(self.k) != self.k or self.k < 0:
            raise ModelError(f"k must be a non-negative integer or 'auto', got {self.k!r}")

    @property
    def auto(self) -> bool:
        return self.k == "auto"


def parse_iterations(text: str | int) -> IterSpec:
    if isinstance(text, int):
        return text
    text = str(text).strip().lower()
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise DataError(f"iteration count must be an integer or 'auto', got {text!r}") from None
    if k < 0:
        raise DataError(f"iteration count must be non-negative, got {k}")
    return k


@dataclass(frozen=True)
class DebiasedFit:
    beta: np.ndarray
    k_used: int
    lam: float
    sigma_hat: float
    cache_id: str
    shrinkage: np.ndarray = field(repr=False)
    rank: int
    converged: bool | None = None  # None for a fixed k, no convergence test run

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "k_used": self.k_used,
            "converged": self.converged,
            "beta": self.beta.tolist(),
            "sigma_hat": self.sigma_hat,
            "rank": self.rank,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def residual_power(r: np.ndarray, k: int) -> np.ndarray:
    """``r^(k+1)``."""
    return np.exp((k + 1) * np.log(r))


def filter_gain(r: np.ndarray, k: int) -> np.ndarray:
    """``1 - r^(k+1)`` without cancellation for r close to 1."""
    return -np.expm1((k + 1) * np.log(r))


def shrinkage_factors(cache: SpectralCache, lam: float, k: int) -> np.ndarray:
    """Per-direction filter ``(1 - r_i^(k+1)) / d_i^2``."""
    return filter_gain(cache.ratios(lam), k) / cache.d1**2


def ridge_fit(cache: SpectralCache, lam: float) -> np.ndarray:
    """``(X'X + lam I)^{-1} X'y``."""
    if not lam > 0:
        raise ModelError(f"lambda must be positive, got {lam}")
    c = cache.u1.T @ cache.xty
    return cache.u1 @ (c / (cache.d1**2 + lam))


def least_squares_pinv(cache: SpectralCache) -> np.ndarray:
    """Minimum-norm least-squares solution ``X^+ y``."""
    return cache.u1 @ (cache.vty / cache.d1)


def _auto_iterations(cache: SpectralCache, lam: float, eta: float, max_iter: int) -> tuple[int, bool]:
    r = cache.ratios(lam)
    # ||beta_k - beta_{k-1}||_2 = || r^k (1 - r) (v1'y) / d ||_2
    base = (1.0 - r) * cache.vty / cache.d1
    log_r = np.log(r)
    chunk = 256
    for start in range(1, max_iter + 1, chunk):
        ks = np.arange(start, min(start + chunk, max_iter + 1))
        steps = np.exp(np.outer(ks, log_r)) * base
        norms = np.sqrt(np.sum(steps**2, axis=1))
        hit = np.nonzero(norms <= eta)[0]
        if hit.size:
            return int(ks[hit[0]]), True
    return max_iter, False


def debias(cache: SpectralCache, cfg: RidgeConfig) -> DebiasedFit:
    """De-biased ridge estimator after ``cfg.k`` plug-in bias corrections.

    In auto mode the fit is returned with ``converged=False`` when the
    step-size criterion is not met within ``max_iter`` steps.
    """
    if cfg.auto:
        k, converged = _auto_iterations(cache, cfg.lam, cfg.eta, cfg.max_iter)
    else:
        k, converged = int(cfg.k), None
    g = shrinkage_factors(cache, cfg.lam, k)
    if k == 0:
        beta = ridge_fit(cache, cfg.lam)  # bit-identical to plain ridge
    else:
        beta = cache.u1 @ (g * (cache.u1.T @ cache.xty))
    fitted = cache.v1 @ (filter_gain(cache.ratios(cfg.lam), k) * cache.vty)
    resid = cache.y - fitted
    sigma_hat = float(np.sqrt(resid @ resid / cache.n))
    return DebiasedFit(
        beta=beta,
        k_used=k,
        lam=float(cfg.lam),
        sigma_hat=sigma_hat,
        cache_id=cache.cache_id,
        shrinkage=g,
        rank=cache.rank,
        converged=converged,
    )


def bias_oracle(cache: SpectralCache, beta_true: np.ndarray, lam: float, k: int) -> np.ndarray:
    """Exact bias ``lam^(k+1) (X'X + lam I)^{-(k+1)} beta`` of the k-step estimator.

    Split into the decaying row-space part and the complement part, which no
    number of correction steps removes.
    """
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_true.shape != (cache.p,):
        raise DataError(f"beta must have length {cache.p}, got shape {beta_true.shape}")
    if int(k) != k or k < 0:
        raise ModelError(f"k must be a non-negative integer, got {k}")
    coef = cache.u1.T @ beta_true
    in_span = cache.u1 @ (residual_power(cache.ratios(lam), int(k)) * coef)
    if cache.rank == cache.p:
        return in_span  # complement is empty; skip the round-off it would add
    return in_span + (beta_true - cache.u1 @ coef)
