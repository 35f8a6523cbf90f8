"""Regression data containers and transformations.

Covers CSV ingestion, centering (with the means kept for un-centering
predictions), lag embedding of a univariate series for autoregressive
designs, and principal-component factor scores for factor-augmented
regressions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``x`` (n x p) and response ``y`` (n,).

    When ``centered`` is true, ``x_mean`` and ``y_mean`` hold the means that
    were subtracted, so predictions can be mapped back to the original scale.
    """

    x: np.ndarray
    y: np.ndarray
    centered: bool = False
    column_names: tuple[str, ...] | None = None
    x_mean: np.ndarray | None = field(default=None, repr=False)
    y_mean: float | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError(f"x must be a matrix, got {x.ndim} dimensions")
        if y.ndim != 1:
            raise DataError(f"y must be a vector, got shape {y.shape}")
        n, p = x.shape
        if n < 2 or p < 1:
            raise DataError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise DataError(f"x has {n} rows but y has {y.shape[0]} entries")
        if not np.all(np.isfinite(x)):
            raise DataError("x contains non-finite values")
        if not np.all(np.isfinite(y)):
            raise DataError("y contains non-finite values")
        if self.column_names is not None and len(self.column_names) != p:
            raise DataError(f"{len(self.column_names)} column names for {p} columns")
        if self.centered:
            scale = 1.0 + np.max(np.abs(x), axis=0)
            if np.any(np.abs(x.mean(axis=0)) > 1e-10 * scale):
                raise DataError("dataset flagged centered but x column means are nonzero")
            if abs(y.mean()) > 1e-10 * (1.0 + np.max(np.abs(y))):
                raise DataError("dataset flagged centered but y mean is nonzero")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        if self.column_names is not None:
            object.__setattr__(self, "column_names", tuple(str(c) for c in self.column_names))
        if self.x_mean is not None:
            object.__setattr__(self, "x_mean", _frozen(self.x_mean))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def center_covariates(self, x0: np.ndarray) -> np.ndarray:
        """Apply the stored column centering to new covariate rows."""
        x0 = np.asarray(x0, dtype=float)
        if not self.centered or self.x_mean is None:
            return x0
        return x0 - self.x_mean

    def uncenter_predictions(self, yhat: np.ndarray | float) -> np.ndarray | float:
        """Map predictions made on the centered scale back to the original one."""
        if not self.centered or self.y_mean is None:
            return yhat
        return yhat + self.y_mean

    def metadata(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "centered": self.centered,
            "column_names": list(self.column_names) if self.column_names else None,
            "x_mean": self.x_mean.tolist() if self.x_mean is not None else None,
            "y_mean": self.y_mean,
        }


@dataclass(frozen=True)
class LagSpec:
    order: int
    horizon: int = 1

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise DataError(f"lag order must be a positive integer, got {self.order}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise DataError(f"horizon must be a positive integer, got {self.horizon}")


def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {col}: non-finite value {text!r}")
    return value


def read_numeric_csv(path: str | Path, has_header: bool = True) -> tuple[np.ndarray, list[str] | None]:
    """Read a comma-delimited numeric table. Row/column numbers in errors are 1-based."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    header = None
    if has_header:
        if not rows:
            raise DataError(f"{path}: empty file")
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    offset = 2 if has_header else 1
    values = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"{path}: row {i + offset} has {len(r)} cells, expected {width}")
        for j, cell in enumerate(r):
            values[i, j] = _parse_cell(cell.strip(), i + offset, j + 1)
    return values, header


def load_csv(
    path: str | Path,
    has_header: bool = True,
    response_column: int | str = -1,
) -> Dataset:
    """Load a dataset from CSV; ``response_column`` is a 0-based index or a header name."""
    values, header = read_numeric_csv(path, has_header)
    width = values.shape[1]
    if isinstance(response_column, str):
        if header is None:
            raise DataError("response column given by name but the file has no header")
        if response_column not in header:
            raise DataError(f"response column {response_column!r} not in header {header}")
        idx = header.index(response_column)
    else:
        idx = int(response_column)
        if not -width <= idx < width:
            raise DataError(f"response column index {idx} out of range for {width} columns")
        idx %= width
    if width < 2:
        raise DataError("need at least one covariate column besides the response")
    keep = [j for j in range(width) if j != idx]
    names = tuple(header[j] for j in keep) if header is not None else None
    return Dataset(values[:, keep], values[:, idx], centered=False, column_names=names)


def center(d: Dataset) -> Dataset:
    if d.centered:
        raise DataError("dataset is already centered")
    x_mean = d.x.mean(axis=0)
    y_mean = float(d.y.mean())
    return Dataset(
        d.x - x_mean,
        d.y - y_mean,
        centered=True,
        column_names=d.column_names,
        x_mean=x_mean,
        y_mean=y_mean,
    )


def lag_embed(series: Sequence[float] | np.ndarray, spec: LagSpec) -> Dataset:
    """Autoregressive design: row t is (y[t-1], ..., y[t-q]) with response y[t-1+h]."""
    s = np.asarray(series, dtype=float).ravel()
    q, h = spec.order, spec.horizon
    n = s.shape[0]
    if n <= q + h:
        raise DataError(f"series of length {n} too short for order {q} and horizon {h}")
    last = np.arange(q - 1, n - h)  # index of the most recent observed value per row
    x = np.column_stack([s[last - j] for j in range(q)])
    y = s[last + h]
    names = tuple(f"lag{j + 1}" for j in range(q))
    return Dataset(x, y, centered=False, column_names=names)


def _pca(x: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DataError("pca input must be a matrix")
    if int(r) != r or r < 1:
        raise DataError(f"number of factors must be a positive integer, got {r}")
    left, s, right_t = np.linalg.svd(x, full_matrices=False)
    tol = max(x.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if r > rank:
        raise DataError(f"requested {r} factors but the matrix has rank {rank}")
    loadings = right_t[:r].T
    # largest-magnitude loading entry of each factor is positive
    pivots = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[pivots, np.arange(r)])
    loadings = loadings * signs
    scores = left[:, :r] * s[:r] * signs
    return scores, loadings


def pca_factors(x: np.ndarray, r: int, return_loadings: bool = False):
    """Principal-component scores of a column-centered panel.

    Scores are ``U[:, :r] * s[:r]`` from the thin SVD, ordered by decreasing
    singular value. With ``return_loadings`` the p x r loading matrix is also
    returned, so that ``scores @ loadings.T`` approximates ``x``.
    """
    scores, loadings = _pca(x, r)
    if return_loadings:
        return scores, loadings
    return scores
