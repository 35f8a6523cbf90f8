"""Seeded simulation studies for the de-biased ridge estimators.

Random numbers come from numpy's Philox4x64 counter-based generator. Every
stream is keyed by ``SeedSequence(seed, spawn_key=(stream, index))``:
stream 0 generates the fixed design and coefficients, stream 1 with
``index = r`` generates the noise of replication r. Normal variates use
numpy's ziggurat sampler (``Generator.standard_normal``). Because each
replication owns its stream and results are reduced in replication order,
a study is bitwise reproducible whatever the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .errors import DataError, ModelError, StudyError
from .inference import CovarianceModel, confidence_interval, prediction_interval, quadratic_form
from .screening import screen, two_stage_fit
from .spectral import RidgeConfig, SpectralCache, debias, decompose_arrays, parse_lambda

DESIGN_STREAM = 0
NOISE_STREAM = 1


def rng_stream(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class DgpSpec:
    family: str  # example1 | example2 | custom
    n: int
    p: int
    seed: int = 1234
    sigma: float = 1.0
    noise_variances: tuple[float, ...] | None = None
    beta_rule: str = ""
    design_rule: str = ""

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise DataError(f"n and p must be positive, got n={self.n}, p={self.p}")
        if self.noise_variances is not None and len(self.noise_variances) != self.n:
            raise DataError("noise_variances must have one entry per observation")

    @property
    def noise(self) -> CovarianceModel:
        if self.noise_variances is not None:
            return CovarianceModel.diagonal(self.noise_variances)
        return CovarianceModel.homoskedastic(self.sigma)

    def noise_sd(self) -> np.ndarray:
        if self.noise_variances is not None:
            return np.sqrt(np.asarray(self.noise_variances, dtype=float))
        return np.full(self.n, float(self.sigma))


@dataclass(frozen=True)
class Design:
    """A fixed design, true coefficients and the per-replication noise generator."""

    spec: DgpSpec
    x: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    cache: SpectralCache = field(repr=False)

    def noise(self, rep: int, n_extra: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Noise for replication ``rep`` and ``n_extra`` standard normals for held-out draws."""
        g = rng_stream(self.spec.seed, NOISE_STREAM, rep)
        eps = self.spec.noise_sd() * g.standard_normal(self.spec.n)
        extra = g.standard_normal(n_extra)
        return eps, extra

    def response(self, rep: int) -> np.ndarray:
        return self.x @ self.beta + self.noise(rep)[0]


def _design(spec: DgpSpec, x: np.ndarray, beta: np.ndarray) -> Design:
    return Design(spec, x, beta, decompose_arrays(x, np.zeros(spec.n)))


def generate_example1(p: int, n: int, seed: int = 1234, sigma: float = 1.0) -> Design:
    """Orthonormal-column design ``X = M N'`` from the SVD of a U(-2, 2) matrix.

    The first p/2 coefficients are U(-2, -1), the rest U(1, 2).
    """
    if p % 2 or p < 2:
        raise DataError(f"p must be a positive even number, got {p}")
    if p >= n:
        raise DataError(f"this design needs p < n, got p={p}, n={n}")
    g = rng_stream(seed, DESIGN_STREAM)
    h = g.uniform(-2.0, 2.0, size=(n, p))
    m, _, nt = np.linalg.svd(h, full_matrices=False)
    x = m @ nt
    beta = np.concatenate([g.uniform(-2.0, -1.0, p // 2), g.uniform(1.0, 2.0, p // 2)])
    spec = DgpSpec(
        "example1", n, p, seed, sigma,
        beta_rule="first p/2 ~ U(-2,-1), remaining p/2 ~ U(1,2)",
        design_rule="X = M N' from thin SVD of H, H_ij ~ U(-2,2)",
    )
    return _design(spec, x, beta)


def generate_example2(p: int, n: int, seed: int = 1234, sigma: float = 1.0) -> Design:
    """Gaussian design with a 10-sparse coefficient vector (p > n)."""
    if p <= n:
        raise DataError(f"this design needs p > n, got p={p}, n={n}")
    if p < 10:
        raise DataError(f"p must be at least 10, got {p}")
    g = rng_stream(seed, DESIGN_STREAM)
    x = g.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:5] = g.uniform(-5.0, -2.0, 5)
    beta[5:10] = g.uniform(2.0, 5.0, 5)
    spec = DgpSpec(
        "example2", n, p, seed, sigma,
        beta_rule="beta_1..5 ~ U(-5,-2), beta_6..10 ~ U(2,5), rest 0",
        design_rule="rows of X iid N(0, I_p)",
    )
    return _design(spec, x, beta)


def generate_gaussian(
    p: int,
    n: int,
    seed: int = 1234,
    sigma: float = 1.0,
    beta: Sequence[float] | None = None,
) -> Design:
    """Custom family: iid N(0,1) design, coefficients U(-2, 2) unless given."""
    g = rng_stream(seed, DESIGN_STREAM)
    x = g.standard_normal((n, p))
    b = g.uniform(-2.0, 2.0, p) if beta is None else np.asarray(beta, dtype=float)
    if b.shape != (p,):
        raise DataError(f"beta must have length {p}")
    spec = DgpSpec(
        "custom", n, p, seed, sigma,
        beta_rule="iid U(-2,2)" if beta is None else "user supplied",
        design_rule="X_ij iid N(0,1)",
    )
    return _design(spec, x, b)


FAMILIES = {"example1": generate_example1, "example2": generate_example2, "custom": generate_gaussian}


# --- estimators -----------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """One estimator in a study.

    Single stage: de-biased ridge at ``lam`` with ``k`` steps (``k=0`` is
    plain ridge). Two stage (``n_star`` set): screen at ``lambda_star``
    (default ``lam``) with ``k`` steps, then ``l`` steps on the restricted
    design at ``lam``. Penalties accept rules such as ``"0.1n"``.
    """

    label: str
    lam: str | float
    k: int | str = 0
    n_star: int | None = None
    lambda_star: str | float | None = None
    l: int | str | None = None

    @property
    def two_stage(self) -> bool:
        return self.n_star is not None

    def screen_key(self, n: int) -> tuple:
        ls = self.lambda_star if self.lambda_star is not None else self.lam
        return (parse_lambda(ls, n), self.k, self.n_star)


def table_estimators(lam: str | float, ks: Sequence[int] = (1, 5, 10, 20, 50, 100)) -> list[EstimatorConfig]:
    """Ridge plus de-biased fits at each k, labelled ``b_lambda`` and ``b_lambda_<k>``."""
    out = [EstimatorConfig("b_lambda", lam, 0)]
    out += [EstimatorConfig(f"b_lambda_{k}", lam, k) for k in ks]
    return out


def screened_estimators(
    lam: str | float,
    k: int = 100,
    n_star: int = 40,
    ls: Sequence[int] = (1, 5, 10, 20, 50, 100),
) -> list[EstimatorConfig]:
    """Post-screening fits labelled ``b_lambda_k`` (l = 0) and ``b_lambda_k_<l>``."""
    out = [EstimatorConfig("b_lambda_k", lam, k, n_star, lam, 0)]
    out += [EstimatorConfig(f"b_lambda_k_{l}", lam, k, n_star, lam, l) for l in ls]
    return out


INFERENCE_CONTRASTS = {
    "e1": (1.0,),
    "e2": (0.0, 1.0),
    "theta1": (0.8, -1.0, 0.5),
    "theta2": (-1.0, 0.5, 0.8),
}


def _pad(theta: Sequence[float], p: int) -> np.ndarray:
    t = np.zeros(p)
    t[: len(theta)] = theta
    return t


# --- results ----------------------------------------------------------------


@dataclass
class StudyResult:
    spec: DgpSpec
    labels: list[str]
    replications: int
    mse: dict[str, float]
    mse_se: dict[str, float]
    aee: dict[str, float]
    aee_se: dict[str, float]
    sigma_hat: dict[str, float]
    mean_error: dict[str, np.ndarray] = field(repr=False)
    mean_error_se: dict[str, np.ndarray] = field(repr=False)
    ep: dict[str, float] = field(default_factory=dict)
    coverage: dict[str, dict[str, float]] = field(default_factory=dict)
    contrast_samples: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    contrast_labels: list[str] = field(default_factory=list)
    contrast_variance: dict[str, np.ndarray | None] = field(default_factory=dict, repr=False)
    beta_true: np.ndarray | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "dgp": asdict(self.spec),
            "replications": self.replications,
            "estimators": self.labels,
            "mse": self.mse,
            "mse_se": self.mse_se,
            "aee": self.aee,
            "aee_se": self.aee_se,
            "sigma_hat": self.sigma_hat,
            "ep": self.ep,
            "coverage": self.coverage,
            "contrasts": self.contrast_labels,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.summary(), **kwargs)


def _replicate(design: Design, plan: list, screens: dict, support, rows, level, rep: int):
    spec = design.spec
    n = spec.n
    eps, extra = design.noise(rep, len(rows))
    y = design.x @ design.beta + eps
    base = design.cache.with_response(y)
    selections = {}
    for key, (lam_star, k, n_star) in screens.items():
        selections[key] = screen(base, lam_star, k, n_star)
    E = len(plan)
    errs = np.empty((E, spec.p))
    rss = np.empty(E)
    ci = np.zeros((E, len(rows)), dtype=bool)
    pi = np.zeros((E, len(rows)), dtype=bool)
    sd = spec.noise_sd()
    for e, (est, lam, skey) in enumerate(plan):
        if skey is None:
            fit = debias(base, RidgeConfig(lam, est.k))
            beta_hat, cache = fit.beta, base
        else:
            fit = two_stage_fit(selections[skey], lam, est.l)
            beta_hat, cache = fit.beta_full, None
        if not (np.all(np.isfinite(beta_hat)) and math.isfinite(fit.sigma_hat)):
            raise StudyError(rep, est.label, "non-finite estimate")
        errs[e] = beta_hat - design.beta
        rss[e] = fit.sigma_hat**2
        for j, row in enumerate(rows):
            x0 = design.x[row]
            mean = x0 @ design.beta
            ci[e, j] = confidence_interval(fit, cache, x0, level).contains(mean)
            pi[e, j] = prediction_interval(fit, cache, x0, level).contains(mean + sd[row] * extra[j])
    ep = np.empty(len(screens))
    for s, key in enumerate(screens):
        idx = selections[key].indices
        ep[s] = np.isin(support, idx).mean() if support.size else 1.0
    return errs, rss, ep, ci, pi


def run_study(
    design: Design,
    estimators: Sequence[EstimatorConfig],
    replications: int = 1000,
    contrasts: dict[str, Sequence[float]] | None = None,
    coverage_rows: Sequence[int] = (),
    level: float = 0.95,
    workers: int = 1,
) -> StudyResult:
    """Run ``replications`` noise draws on a fixed design and summarise every estimator.

    MSE and AEE follow the empirical definitions (mean squared l2 error;
    l2 norm of the mean error over sqrt(p)); ``sigma_hat`` pools the
    per-replication residual mean squares inside the square root. EP is
    reported for each distinct screening step, keyed by the first
    estimator label that uses it. Coverage uses rows of X as covariate points.
    """
    if replications < 1:
        raise ModelError("replications must be positive")
    labels = [e.label for e in estimators]
    if len(set(labels)) != len(labels):
        raise ModelError("estimator labels must be unique")
    spec = design.spec
    n, p = spec.n, spec.p
    screens: dict = {}
    screen_owner: dict = {}
    plan = []
    for est in estimators:
        lam = parse_lambda(est.lam, n)
        skey = None
        if est.two_stage:
            if est.l is None:
                raise ModelError(f"estimator {est.label!r}: two-stage fit needs l")
            skey = est.screen_key(n)
            if skey not in screens:
                screens[skey] = skey
                screen_owner[skey] = est.label
        plan.append((est, lam, skey))
    rows = [int(r) for r in coverage_rows]
    support = np.flatnonzero(design.beta)

    def work(reps):
        return [_replicate(design, plan, screens, support, rows, level, r) for r in reps]

    chunks = np.array_split(np.arange(replications), max(1, min(workers, replications)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    out = [item for part in parts for item in part]

    errs = np.stack([o[0] for o in out])  # (R, E, p)
    rss = np.stack([o[1] for o in out])  # (R, E)
    eps_ = np.stack([o[2] for o in out]) if screens else None
    ci = np.stack([o[3] for o in out])
    pi = np.stack([o[4] for o in out])
    R = replications

    res = StudyResult(spec, labels, R, {}, {}, {}, {}, {}, {}, {}, beta_true=design.beta.copy())
    for e, lab in enumerate(labels):
        sq = np.sum(errs[:, e] ** 2, axis=1)
        res.mse[lab] = float(sq.mean())
        res.mse_se[lab] = float(sq.std(ddof=1) / math.sqrt(R)) if R > 1 else float("nan")
        m = errs[:, e].mean(axis=0)
        res.mean_error[lab] = m
        coord_var = errs[:, e].var(axis=0, ddof=1) if R > 1 else np.full(p, np.nan)
        res.mean_error_se[lab] = np.sqrt(coord_var / R)
        res.aee[lab] = float(np.linalg.norm(m) / math.sqrt(p))
        res.aee_se[lab] = float(math.sqrt(coord_var.sum() / R / p))
        res.sigma_hat[lab] = float(math.sqrt(rss[:, e].mean()))
        if rows:
            res.coverage[lab] = {"confidence": float(ci[:, e].mean()), "prediction": float(pi[:, e].mean())}
    for s, key in enumerate(screens):
        res.ep[screen_owner[key]] = float(eps_[:, s].mean())
    if contrasts:
        thetas = np.column_stack([_pad(t, p) for t in contrasts.values()])
        res.contrast_labels = list(contrasts)
        for e, (est, lam, skey) in enumerate(plan):
            res.contrast_samples[est.label] = math.sqrt(n) * errs[:, e] @ thetas
            if skey is None and isinstance(est.k, int):
                res.contrast_variance[est.label] = np.array(
                    [n * quadratic_form(design.cache, lam, est.k, spec.noise, thetas[:, c])
                     for c in range(thetas.shape[1])]
                )
            else:
                res.contrast_variance[est.label] = None
    return res


def emit_histogram_data(result: StudyResult, estimator: str, contrast: str) -> str:
    """CSV of contrast draws and the limiting normal density at each draw."""
    if estimator not in result.contrast_samples:
        raise DataError(f"no contrast samples recorded for estimator {estimator!r}")
    if contrast not in result.contrast_labels:
        raise DataError(f"unknown contrast {contrast!r}; recorded: {result.contrast_labels}")
    c = result.contrast_labels.index(contrast)
    values = result.contrast_samples[estimator][:, c]
    var = result.contrast_variance.get(estimator)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "density"])
    sd = math.sqrt(var[c]) if var is not None else None
    for v in values:
        dens = norm.pdf(v, scale=sd) if sd else float("nan")
        w.writerow([repr(float(v)), repr(float(dens))])
    return buf.getvalue()


def study_table(results: Sequence[StudyResult], metric: str = "mse") -> str:
    """CSV with one row per (p, n) and one column per estimator label."""
    if not results:
        raise DataError("no results to tabulate")
    labels = results[0].labels
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = ["sigma_hat_0", "sigma_hat_last"] if metric == "mse" else []
    w.writerow(["p", "n"] + labels + extra)
    for res in results:
        table = getattr(res, metric)
        row = [res.spec.p, res.spec.n] + [f"{table[lab]:.6g}" for lab in labels]
        if extra:
            row += [f"{res.sigma_hat[labels[0]]:.6g}", f"{res.sigma_hat[labels[-1]]:.6g}"]
        w.writerow(row)
    return buf.getvalue()


# --- JSON study configs --------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    family: str
    p: int
    n: int
    estimators: tuple[EstimatorConfig, ...]
    seed: int = 1234
    sigma: float = 1.0
    replications: int = 1000
    contrasts: dict = field(default_factory=dict)
    coverage_rows: tuple[int, ...] = ()
    level: float = 0.95

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyConfig":
        try:
            ests = tuple(EstimatorConfig(**e) for e in doc["estimators"])
            family = doc["family"]
            if family not in FAMILIES:
                raise DataError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
            return cls(
                family=family,
                p=int(doc["p"]),
                n=int(doc["n"]),
                estimators=ests,
                seed=int(doc.get("seed", 1234)),
                sigma=float(doc.get("sigma", 1.0)),
                replications=int(doc.get("replications", 1000)),
                contrasts={k: tuple(v) for k, v in doc.get("contrasts", {}).items()},
                coverage_rows=tuple(doc.get("coverage_rows", ())),
                level=float(doc.get("level", 0.95)),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"invalid study config: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = [asdict(e) for e in self.estimators]
        d["coverage_rows"] = list(self.coverage_rows)
        d["contrasts"] = {k: list(v) for k, v in self.contrasts.items()}
        return d

    def design(self) -> Design:
        return FAMILIES[self.family](self.p, self.n, self.seed, self.sigma)

    def run(self, workers: int = 1) -> StudyResult:
        return run_study(
            self.design(),
            self.estimators,
            self.replications,
            self.contrasts or None,
            self.coverage_rows,
            self.level,
            workers,
        )
