"""Rolling-window direct forecasts with de-biased ridge prediction intervals.

At each forecast origin t the model is re-estimated on the last ``W``
observations: the covariate panel in the window is standardised and reduced
to ``factors`` principal-component scores, the target is lag-embedded, and
``y[s + h]`` is regressed on ``(y[s], ..., y[s - q + 1], f[s])``. The
prediction for ``y[t + h]`` uses the row at ``s = t``. The penalty is picked
from a grid by out-of-sample mean squared forecast error over the test origins.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset, center, pca_factors
from .errors import DataError
from .inference import prediction_interval
from .montecarlo import rng_stream
from .screening import screen, two_stage_fit
from .spectral import IterSpec, RidgeConfig, debias, decompose, parse_lambda

DEFAULT_LAMBDA_GRID = ("0.05n", "0.1n") + tuple(f"{m / 10:g}n" for m in range(2, 16))


@dataclass(frozen=True)
class ForecastConfig:
    lags: int
    factors: int = 0
    horizon: int = 1
    split: float = 0.8
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    k: IterSpec = 10
    eta: float = 1e-4
    level: float = 0.95
    screen: bool = False
    n_star: int | None = None

    def __post_init__(self):
        if self.lags < 1:
            raise DataError("lags must be at least 1")
        if self.factors < 0:
            raise DataError("factors must be non-negative")
        if self.horizon < 1:
            raise DataError("horizon must be at least 1")
        if not 0 < self.split < 1:
            raise DataError("split must lie in (0, 1)")
        if not self.lambda_grid:
            raise DataError("lambda grid must be non-empty")
        if self.screen:
            p = self.lags + self.factors
            if self.n_star is None or not 1 <= self.n_star <= p:
                raise DataError(f"screening needs 1 <= n_star <= {p}")


@dataclass(frozen=True)
class ForecastPoint:
    origin: int
    point: float
    lower: float
    upper: float
    realized: float

    @property
    def covered(self) -> bool:
        return self.lower <= self.realized <= self.upper


@dataclass(frozen=True)
class ForecastResult:
    config: ForecastConfig
    window: int
    lambda_rule: str
    lambda_value: float
    msfe: dict = field(repr=False)  # lambda rule -> MSFE
    points: tuple[ForecastPoint, ...] = field(repr=False)

    @property
    def coverage(self) -> float:
        return float(np.mean([pt.covered for pt in self.points]))

    def summary(self) -> dict:
        return {
            "window": self.window,
            "test_points": len(self.points),
            "lambda_rule": self.lambda_rule,
            "lambda_value": self.lambda_value,
            "coverage": self.coverage,
            "msfe": self.msfe,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["origin", "point", "lower", "upper", "realized", "covered"])
        for pt in self.points:
            w.writerow([pt.origin, repr(pt.point), repr(pt.lower), repr(pt.upper), repr(pt.realized), int(pt.covered)])
        return buf.getvalue()


def _window_design(y_w: np.ndarray, panel_w: np.ndarray | None, cfg: ForecastConfig):
    q, h, r = cfg.lags, cfg.horizon, cfg.factors
    W = y_w.shape[0]
    cols = []
    names = []
    for j in range(q):
        cols.append(np.roll(y_w, j))  # entry s holds y[s - j]; wrapped entries are never used
        names.append(f"lag{j + 1}")
    if r:
        z = panel_w - panel_w.mean(axis=0)
        scale = z.std(axis=0)
        scale[scale == 0] = 1.0
        cols.extend(pca_factors(z / scale, r).T)
        names.extend(f"factor{j + 1}" for j in range(r))
    z_all = np.column_stack(cols)
    s = np.arange(q - 1, W - h)
    if s.size < 2:
        raise DataError("window too short for the requested lags and horizon")
    d = Dataset(z_all[s], y_w[s + h], column_names=tuple(names))
    return d, z_all[W - 1]


def _predict(y_w, panel_w, cfg: ForecastConfig, lam_rules: Sequence[str]):
    d, x_now = _window_design(y_w, panel_w, cfg)
    dc = center(d)
    cache = decompose(dc)
    x0 = dc.center_covariates(x_now)
    out = []
    for rule in lam_rules:
        lam = parse_lambda(rule, dc.n)
        if cfg.screen:
            sel = screen(cache, lam, cfg.k, cfg.n_star, eta=cfg.eta)
            fit = two_stage_fit(sel, lam, cfg.k, eta=cfg.eta)
            iv = prediction_interval(fit, None, x0, cfg.level)
        else:
            fit = debias(cache, RidgeConfig(lam, cfg.k, cfg.eta))
            iv = prediction_interval(fit, cache, x0, cfg.level)
        out.append((dc.uncenter_predictions(iv.point), dc.uncenter_predictions(iv.lower),
                    dc.uncenter_predictions(iv.upper)))
    return out


def rolling_forecast(y: np.ndarray, panel: np.ndarray | None, cfg: ForecastConfig) -> ForecastResult:
    """Rolling-window forecasts over the last ``1 - split`` share of the sample."""
    y = np.asarray(y, dtype=float).ravel()
    T = y.shape[0]
    if panel is not None:
        panel = np.asarray(panel, dtype=float)
        if panel.shape[0] != T:
            raise DataError("panel and target must have the same number of rows")
        if cfg.factors > panel.shape[1]:
            raise DataError(f"{cfg.factors} factors requested from a {panel.shape[1]}-column panel")
    elif cfg.factors:
        raise DataError("factors requested but no covariate panel given")
    W = int(np.floor(cfg.split * T))
    if W - cfg.lags - cfg.horizon + 1 < cfg.lags + cfg.factors + 2:
        raise DataError(f"insufficient history: first window has {W} observations")
    origins = range(W - 1, T - cfg.horizon)
    if len(origins) == 0:
        raise DataError("no test points left after the training split")
    rules = [str(r) for r in cfg.lambda_grid]
    preds = []
    for t in origins:
        sl = slice(t - W + 1, t + 1)
        preds.append(_predict(y[sl], panel[sl] if panel is not None else None, cfg, rules))
    realized = np.array([y[t + cfg.horizon] for t in origins])
    msfe = {}
    for j, rule in enumerate(rules):
        e = np.array([p[j][0] for p in preds]) - realized
        msfe[rule] = float(np.mean(e**2))
    best = min(range(len(rules)), key=lambda j: (msfe[rules[j]], j))
    n_rows = W - cfg.lags - cfg.horizon + 1
    points = tuple(
        ForecastPoint(t, float(p[best][0]), float(p[best][1]), float(p[best][2]), float(v))
        for t, p, v in zip(origins, preds, realized)
    )
    return ForecastResult(cfg, W, rules[best], parse_lambda(rules[best], n_rows), msfe, points)


def simulate_factor_series(
    T: int = 400,
    m: int = 50,
    r: int = 5,
    q: int = 4,
    seed: int = 1234,
    sigma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic factor-augmented series: panel ``X_t = L f_t + e_t`` and an ARX target.

    Factors follow independent AR(1) processes with coefficient 0.5;
    ``y[t+1] = sum_j a_j y[t-j+1] + g' f_t + eps``.
    """
    g = rng_stream(seed, 2)
    burn = 100
    n = T + burn
    f = np.zeros((n, r))
    shocks = g.standard_normal((n, r))
    for t in range(1, n):
        f[t] = 0.5 * f[t - 1] + shocks[t]
    loadings = g.standard_normal((m, r))
    panel = f @ loadings.T + g.standard_normal((n, m))
    a = 0.4 * 0.5 ** np.arange(q)
    a[1::2] *= -1
    gamma = g.uniform(-0.6, 0.6, r)
    y = np.zeros(n)
    eps = sigma * g.standard_normal(n)
    for t in range(q, n):
        y[t] = a @ y[t - 1 - np.arange(q)] + gamma @ f[t - 1] + eps[t]
    return y[burn:], panel[burn:]


def simulate_ar(T: int, coefs: Sequence[float], seed: int = 1234, sigma: float = 1.0) -> np.ndarray:
    """Zero-mean AR series with Gaussian innovations, after a burn-in of 200."""
    g = rng_stream(seed, 3)
    a = np.asarray(coefs, dtype=float)
    q = a.size
    n = T + 200
    e = sigma * g.standard_normal(n)
    y = np.zeros(n)
    for t in range(q, n):
        y[t] = a @ y[t - 1 - np.arange(q)] + e[t]
    return y[200:]
