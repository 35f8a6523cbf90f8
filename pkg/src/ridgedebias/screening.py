"""Ridge screening for p > n and the two-stage restricted de-biased fit.

Stage one ranks covariates by the magnitude of the de-biased ridge
coefficients at ``lambda_star`` and keeps the ``n_star`` largest. Stage two
re-runs the de-biasing on the restricted design, which has a full-rank Gram
matrix when ``n_star < n``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import DataError, ModelError
from .spectral import (
    DEFAULT_ETA,
    DEFAULT_MAX_ITER,
    DebiasedFit,
    IterSpec,
    RidgeConfig,
    SpectralCache,
    debias,
    decompose_arrays,
    ridge_fit,
)


@dataclass(frozen=True)
class ScreeningSelection:
    indices: np.ndarray  # 0-based, ascending
    lambda_star: float
    k_stage1: int
    n_star: int
    restricted_cache: SpectralCache = field(repr=False)
    stage1_beta: np.ndarray = field(repr=False)
    p: int
    notes: tuple[str, ...] = ()

    @property
    def inference_ok(self) -> bool:
        return not self.notes

    def to_dict(self, column_names: Sequence[str] | None = None) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "n_star": self.n_star,
            "k_stage1": self.k_stage1,
            "indices": [int(i) for i in self.indices],
            "column_names": [column_names[i] for i in self.indices] if column_names else None,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class TwoStageFit:
    selection: ScreeningSelection
    fit: DebiasedFit  # on the restricted design
    beta_full: np.ndarray

    @property
    def beta_restricted(self) -> np.ndarray:
        return self.fit.beta

    @property
    def l_used(self) -> int:
        return self.fit.k_used

    @property
    def lam(self) -> float:
        return self.fit.lam

    @property
    def sigma_hat(self) -> float:
        return self.fit.sigma_hat

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "l_used": self.l_used,
            "converged": self.fit.converged,
            "sigma_hat": self.sigma_hat,
            "indices": [int(i) for i in self.selection.indices],
            "beta_restricted": self.beta_restricted.tolist(),
            "beta_full": self.beta_full.tolist(),
        }


def top_magnitude(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` largest |values|, ties to the lower index, sorted ascending."""
    order = np.argsort(-np.abs(np.asarray(values, dtype=float)), kind="stable")
    return np.sort(order[:count])


def screen(
    cache: SpectralCache,
    lambda_star: float,
    k: IterSpec = "auto",
    n_star: int = 1,
    eta: float = DEFAULT_ETA,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ScreeningSelection:
    n, p = cache.n, cache.p
    if int(n_star) != n_star or n_star < 1 or n_star > p:
        raise ModelError(f"n_star must be an integer in [1, {p}], got {n_star}")
    fit = debias(cache, RidgeConfig(lambda_star, k, eta, max_iter))
    idx = top_magnitude(fit.beta, int(n_star))
    notes = []
    if p > n and n_star >= n:
        notes.append(
            f"n_star={n_star} >= n={n}: restricted Gram matrix is singular, inference disabled"
        )
    return ScreeningSelection(
        indices=idx,
        lambda_star=float(lambda_star),
        k_stage1=fit.k_used,
        n_star=int(n_star),
        restricted_cache=cache.restrict(idx),
        stage1_beta=fit.beta,
        p=p,
        notes=tuple(notes),
    )


def two_stage_fit(
    sel: ScreeningSelection,
    lam: float | None = None,
    l: IterSpec = "auto",
    eta: float = DEFAULT_ETA,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TwoStageFit:
    """Second-stage de-biased fit on the screened columns; ``lam`` defaults to ``lambda_star``."""
    lam = sel.lambda_star if lam is None else lam
    fit = debias(sel.restricted_cache, RidgeConfig(lam, l, eta, max_iter))
    beta_full = np.zeros(sel.p)
    beta_full[sel.indices] = fit.beta
    return TwoStageFit(selection=sel, fit=fit, beta_full=beta_full)


# --- tuning -----------------------------------------------------------------


@dataclass(frozen=True)
class KFold:
    folds: int = 5

    def __post_init__(self):
        if self.folds < 2:
            raise DataError("K-fold validation needs at least 2 folds")

    def splits(self, n: int):
        if n < self.folds:
            raise DataError(f"cannot split {n} rows into {self.folds} folds")
        bounds = np.linspace(0, n, self.folds + 1).round().astype(int)
        for a, b in zip(bounds[:-1], bounds[1:]):
            val = np.arange(a, b)
            train = np.concatenate([np.arange(0, a), np.arange(b, n)])
            yield train, val


@dataclass(frozen=True)
class Holdout:
    """Ordered split: the last ``fraction`` of rows is the validation set."""

    fraction: float = 0.2

    def __post_init__(self):
        if not 0 < self.fraction < 1:
            raise DataError("holdout fraction must be in (0, 1)")

    def splits(self, n: int):
        cut = n - max(1, int(round(self.fraction * n)))
        if cut < 2:
            raise DataError(f"holdout leaves {cut} training rows")
        yield np.arange(cut), np.arange(cut, n)


@dataclass(frozen=True)
class TuneResult:
    lambda_star: float
    n_star: int
    scores: dict  # (lambda, n_star) -> mean validation MSE; infeasible pairs absent
    notes: tuple[str, ...] = ()
    near_tie: bool = False

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "n_star": self.n_star,
            "near_tie": self.near_tie,
            "scores": [
                {"lambda": lam, "n_star": ns, "mse": s} for (lam, ns), s in self.scores.items()
            ],
            "notes": list(self.notes),
        }


def _pair_score(x, y, splits, lam, n_star, k, eta, max_iter):
    errs = []
    for train, val in splits:
        cache = decompose_arrays(x[train], y[train])
        sel_fit = debias(cache, RidgeConfig(lam, k, eta, max_iter))
        idx = top_magnitude(sel_fit.beta, n_star)
        b = ridge_fit(cache.restrict(idx), lam)
        resid = y[val] - x[val][:, idx] @ b
        errs.append(resid @ resid)
    total = sum(len(v) for _, v in splits)
    return float(sum(errs) / total)


def tune(
    d: Dataset,
    lambda_grid: Sequence[float],
    n_star_grid: Sequence[int],
    scheme: KFold | Holdout = KFold(5),
    k: IterSpec = "auto",
    eta: float = DEFAULT_ETA,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: int = 1,
    tie_tol: float = 1e-6,
) -> TuneResult:
    """Choose ``(lambda_star, n_star)`` by validation MSE of the restricted ridge fit.

    Each training fold is screened at ``lambda_star`` and the restricted ridge
    estimator with the same penalty is scored on the held-out rows. Ties go
    to the smaller ``n_star``, then the smaller penalty.
    """
    if not lambda_grid or not n_star_grid:
        raise DataError("tuning grids must be non-empty")
    splits = list(scheme.splits(d.n))
    min_train = min(len(t) for t, _ in splits)
    notes = []
    pairs = []
    for lam in lambda_grid:
        for ns in n_star_grid:
            if ns < 1 or ns >= min_train or ns > d.p:
                notes.append(f"skipped (lambda={lam}, n_star={ns}): needs 1 <= n_star < {min_train} and <= p")
                continue
            pairs.append((float(lam), int(ns)))
    if not pairs:
        raise ModelError("every (lambda, n_star) pair is infeasible for this validation scheme")

    def run(pair):
        return _pair_score(d.x, d.y, splits, pair[0], pair[1], k, eta, max_iter)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(run, pairs))
    else:
        values = [run(pr) for pr in pairs]
    scores = dict(zip(pairs, values))
    best = min(pairs, key=lambda pr: (scores[pr], pr[1], pr[0]))
    others = [scores[pr] for pr in pairs if pr != best]
    near_tie = bool(others) and min(others) - scores[best] < tie_tol
    if near_tie:
        notes.append(f"near tie: best score {scores[best]:.3g} within {tie_tol:g} of another pair")
    return TuneResult(best[0], best[1], scores, tuple(notes), near_tie)


def selection_json(sel: ScreeningSelection, column_names=None) -> str:
    return json.dumps(sel.to_dict(column_names), indent=2)
