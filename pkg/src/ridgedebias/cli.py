"""Command-line entry point: ``ridgedebias <subcommand> ...``.

Every run writes its artifacts into ``--out`` together with ``manifest.json``,
which records all resolved parameters, input checksums and the package
version. Outputs contain no timestamps, so re-running with the same inputs
reproduces them byte for byte.

Exit codes: 0 success, 1 numeric/model error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import Dataset, center, load_csv, read_numeric_csv
from .errors import DataError, RidgeDebiasError
from .forecast import DEFAULT_LAMBDA_GRID, ForecastConfig, rolling_forecast
from .inference import confidence_interval, contrast_test, intervals_to_csv, prediction_interval
from .montecarlo import INFERENCE_CONTRASTS, StudyConfig, emit_histogram_data, study_table
from .screening import Holdout, KFold, screen, tune, two_stage_fit
from .spectral import (
    DEFAULT_ETA,
    DEFAULT_MAX_ITER,
    DEFAULT_RANK_TOL,
    RidgeConfig,
    debias,
    decompose,
    decompose_arrays,
    parse_iterations,
    parse_lambda,
)
from .tradeoff import regime_classify

THREADS_ENV = "RIDGEDEBIAS_THREADS"


class UsageError(Exception):
    pass


# --- helpers ----------------------------------------------------------------


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects outputs and writes the manifest for one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.warnings: list[str] = []
        self.resolved: dict = {}

    def write(self, name: str, text: str):
        (self.out / name).write_text(text, encoding="utf-8")
        self.files.append(name)

    def write_json(self, name: str, obj):
        self.write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_table(self, stem: str, rows: list[dict]):
        """Tabular output honouring ``--format``."""
        if self.args.format == "json":
            self.write_json(f"{stem}.json", rows)
            return
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        self.write(f"{stem}.csv", buf.getvalue())

    def finish(self):
        params = {
            k: v for k, v in sorted(vars(self.args).items())
            if k not in {"func", "out", "threads"}
        }
        inputs = {}
        for key in ("input", "x0", "config", "beta"):
            path = getattr(self.args, key, None)
            if path:
                inputs[path] = _sha256(path)
        manifest = {
            "command": self.args.command,
            "version": __version__,
            "parameters": params,
            "resolved": self.resolved,
            "inputs": inputs,
            "outputs": sorted(self.files),
            "warnings": self.warnings,
        }
        (self.out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8"
        )


def _response(text: str | None):
    if text is None:
        return -1
    try:
        return int(text)
    except ValueError:
        return text


def _load(args) -> tuple[Dataset, Dataset]:
    raw = load_csv(args.input, has_header=not args.no_header, response_column=_response(args.response))
    return raw, (raw if args.no_center else center(raw))


def _iter(text):
    try:
        return parse_iterations(text)
    except DataError as exc:
        raise UsageError(str(exc)) from None


def _lambda(rule, n):
    try:
        return parse_lambda(rule, n)
    except DataError as exc:
        raise UsageError(str(exc)) from None


def _grid(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _load_x0(args, d: Dataset) -> np.ndarray:
    values, _ = read_numeric_csv(args.x0, has_header=not args.no_header)
    if values.shape[1] != d.p:
        raise DataError(f"{args.x0}: expected {d.p} covariate columns, found {values.shape[1]}")
    return d.center_covariates(values)


def _interval_rows(pairs, d: Dataset):
    rows = []
    for x0_id, iv in pairs:
        shift = d.uncenter_predictions(0.0) if d.centered else 0.0
        rows.append({
            "x0_id": x0_id,
            "point": iv.point + shift,
            "se": iv.se,
            "lower": iv.lower + shift,
            "upper": iv.upper + shift,
            "level": iv.level,
            "kind": iv.kind,
        })
    return rows


# --- subcommands ----------------------------------------------------------------


def cmd_fit(args, run: Run):
    raw, d = _load(args)
    lam = _lambda(args.lam, d.n)
    k = 0 if args.command == "fit" else _iter(args.k)
    cache = decompose(d, args.rank_tol)
    fit = debias(cache, RidgeConfig(lam, k, args.eta, args.max_iter))
    run.resolved.update(lambda_value=lam, k=k, n=d.n, p=d.p)
    if fit.converged is False:
        run.warnings.append(f"auto iteration hit max_iter={args.max_iter} without meeting eta={args.eta}")
    doc = fit.to_dict()
    doc["dataset"] = d.metadata()
    run.write_json("fit.json", doc)
    return fit, cache, d


def cmd_infer(args, run: Run):
    fit, cache, d = cmd_fit(args, run)
    if args.x0:
        x0s = _load_x0(args, d)
        pairs = []
        for i, x0 in enumerate(x0s):
            pairs.append((i, confidence_interval(fit, cache, x0, args.level)))
            pairs.append((i, prediction_interval(fit, cache, x0, args.level)))
        run.write_table("intervals", _interval_rows(pairs, d))
    if args.theta:
        theta = np.array([float(t) for t in _grid(args.theta)])
        if theta.size != d.p:
            raise UsageError(f"--theta needs {d.p} entries, got {theta.size}")
        t = contrast_test(fit, cache, theta, args.null)
        run.write_json("contrast.json", {"estimate": t.estimate, "se": t.se, "z": t.z, "p_value": t.p_value})


def cmd_screen(args, run: Run):
    raw, d = _load(args)
    k = _iter(args.k)
    if args.tune:
        if not (args.lambda_grid and args.n_star_grid):
            raise UsageError("--tune needs --lambda-grid and --n-star-grid")
        result = _run_tune(args, d, run)
        lam_star, n_star = result.lambda_star, result.n_star
    else:
        if args.lambda_star is None or args.n_star is None:
            raise UsageError("screen needs --lambda-star and --n-star (or --tune with grids)")
        lam_star, n_star = _lambda(args.lambda_star, d.n), args.n_star
    cache = decompose(d, args.rank_tol)
    sel = screen(cache, lam_star, k, n_star, args.eta, args.max_iter)
    lam2 = _lambda(args.lam, d.n) if args.lam else lam_star
    fit = two_stage_fit(sel, lam2, _iter(args.l), args.eta, args.max_iter)
    run.resolved.update(lambda_star=lam_star, n_star=n_star, lambda_value=lam2, n=d.n, p=d.p)
    run.warnings.extend(sel.notes)
    run.write_json("selection.json", sel.to_dict(d.column_names))
    run.write_json("two_stage.json", fit.to_dict())
    if args.x0:
        if not sel.inference_ok:
            run.warnings.append("intervals skipped: inference disabled for this selection")
            return
        x0s = _load_x0(args, d)
        pairs = []
        for i, x0 in enumerate(x0s):
            pairs.append((i, confidence_interval(fit, None, x0, args.level)))
            pairs.append((i, prediction_interval(fit, None, x0, args.level)))
        run.write_table("intervals", _interval_rows(pairs, d))


def _scheme(args):
    if args.holdout is not None:
        return Holdout(args.holdout)
    return KFold(args.folds)


def _run_tune(args, d: Dataset, run: Run):
    lams = [_lambda(r, d.n) for r in _grid(args.lambda_grid)]
    try:
        n_stars = [int(s) for s in _grid(args.n_star_grid)]
    except ValueError:
        raise UsageError("--n-star-grid must be a comma-separated list of integers") from None
    result = tune(d, lams, n_stars, _scheme(args), _iter(args.k), args.eta, args.max_iter, args.threads)
    run.warnings.extend(result.notes)
    run.resolved.update(chosen_lambda_star=result.lambda_star, chosen_n_star=result.n_star)
    run.write_json("tune.json", result.to_dict())
    return result


def cmd_tune(args, run: Run):
    raw, d = _load(args)
    _run_tune(args, d, run)


def _read_beta(path: str, p: int) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        beta = np.asarray(json.loads(text), dtype=float)
    else:
        beta = np.array([float(t) for t in text.replace("\n", ",").split(",") if t.strip()])
    if beta.shape != (p,):
        raise DataError(f"{path}: expected {p} coefficients, found {beta.size}")
    return beta


def cmd_tradeoff(args, run: Run):
    if args.input:
        raw, d = _load(args)
        cache = decompose(d, args.rank_tol)
        if not args.beta:
            raise UsageError("--beta is required with --input")
        beta = _read_beta(args.beta, d.p)
        n = d.n
    else:
        cfg = StudyConfig(args.family, args.p, args.n, (), seed=args.seed)
        design = cfg.design()
        cache, beta, n = design.cache, design.beta, args.n
    lam = _lambda(args.lam, n)
    report = regime_classify(cache, beta, lam, args.sigma, args.k_max)
    run.resolved.update(lambda_value=lam, n=n)
    curve = report.curve
    rows = [
        {"k": int(k), "bias_sq": float(b), "variance": float(v), "total": float(t)}
        for k, b, v, t in zip(curve.ks, curve.bias_sq, curve.variance, curve.total)
    ]
    run.write_table("mse_curve", rows)
    run.write_json("regime.json", report.to_dict())


def cmd_simulate(args, run: Run):
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        cfg = StudyConfig.from_dict(doc)
    else:
        raise UsageError("simulate needs --config (see scripts/ for examples)")
    if args.replications:
        cfg = StudyConfig.from_dict({**cfg.to_dict(), "replications": args.replications})
    run.resolved["study"] = cfg.to_dict()
    result = cfg.run(workers=args.threads)
    run.write_json("summary.json", result.summary())
    for metric in ("mse", "aee"):
        text = study_table([result], metric)
        if args.format == "json":
            rows = list(csv.DictReader(io.StringIO(text)))
            run.write_json(f"table_{metric}.json", rows)
        else:
            run.write(f"table_{metric}.csv", text)
    for est in result.contrast_samples:
        for c in result.contrast_labels:
            run.write(f"hist_{est}_{c}.csv", emit_histogram_data(result, est, c))


def cmd_forecast(args, run: Run):
    values, header = read_numeric_csv(args.input, has_header=not args.no_header)
    target = _response(args.target)
    if isinstance(target, str):
        if header is None or target not in header:
            raise DataError(f"target column {target!r} not found")
        target = header.index(target)
    target %= values.shape[1]
    y = values[:, target]
    rest = [j for j in range(values.shape[1]) if j != target]
    panel = values[:, rest] if rest and args.factors else None
    cfg = ForecastConfig(
        lags=args.lags,
        factors=args.factors,
        horizon=args.horizon,
        split=args.split,
        lambda_grid=tuple(_grid(args.lambda_grid)),
        k=_iter(args.k),
        eta=args.eta,
        level=args.level,
        screen=args.screen,
        n_star=args.n_star,
    )
    result = rolling_forecast(y, panel, cfg)
    run.resolved.update(lambda_rule=result.lambda_rule, lambda_value=result.lambda_value)
    run.write_json("forecast_summary.json", result.summary())
    rows = [
        {"origin": pt.origin, "point": pt.point, "lower": pt.lower, "upper": pt.upper,
         "realized": pt.realized, "covered": int(pt.covered)}
        for pt in result.points
    ]
    run.write_table("forecasts", rows)


# --- parser -------------------------------------------------------------------


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _common(p: argparse.ArgumentParser, data=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=["json", "csv"], default="csv", help="format of tabular outputs")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help=f"worker cap (default from ${THREADS_ENV}, else 1)")
    if data:
        p.add_argument("--input", required=True, help="CSV file")
        p.add_argument("--response", default=None, help="response column name or 0-based index (default: last)")
        p.add_argument("--no-header", action="store_true")
        p.add_argument("--no-center", action="store_true", help="do not center x and y before fitting")
        p.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)


def _iteration_flags(p, default_k):
    p.add_argument("--k", default=default_k, help="correction steps, integer or 'auto'")
    p.add_argument("--eta", type=float, default=DEFAULT_ETA, help="auto-mode step tolerance")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ridgedebias", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("fit", "plain ridge fit"), ("debias", "iteratively de-biased ridge fit")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--lambda", "--lambda-rule", dest="lam", required=True, help="penalty, e.g. 12.5 or 0.3n")
        _iteration_flags(p, "auto")
        p.set_defaults(func=cmd_fit)

    p = sub.add_parser("infer", help="de-biased fit with intervals and contrast tests (p < n)")
    _common(p)
    p.add_argument("--lambda", "--lambda-rule", dest="lam", required=True)
    _iteration_flags(p, "auto")
    p.add_argument("--x0", help="CSV of covariate rows for intervals")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--theta", help="comma-separated contrast vector")
    p.add_argument("--null", type=float, default=0.0)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("screen", help="ridge screening, two-stage fit and restricted intervals (p > n)")
    _common(p)
    p.add_argument("--lambda-star")
    p.add_argument("--n-star", type=int)
    _iteration_flags(p, "auto")
    p.add_argument("--lambda", "--lambda-rule", dest="lam", help="second-stage penalty (default: lambda-star)")
    p.add_argument("--l", default="auto", help="second-stage steps, integer or 'auto'")
    p.add_argument("--tune", action="store_true", help="choose (lambda-star, n-star) by validation")
    p.add_argument("--lambda-grid")
    p.add_argument("--n-star-grid")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--holdout", type=float)
    p.add_argument("--x0")
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("tune", help="validation choice of (lambda-star, n-star)")
    _common(p)
    p.add_argument("--lambda-grid", required=True)
    p.add_argument("--n-star-grid", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--holdout", type=float)
    _iteration_flags(p, "auto")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("tradeoff", help="exact bias-variance curve over k")
    _common(p, data=False)
    p.add_argument("--input", help="CSV design (with response column); otherwise a simulated design")
    p.add_argument("--response", default=None)
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)
    p.add_argument("--beta", help="true coefficients (JSON list or comma/newline separated)")
    p.add_argument("--family", default="example1", choices=["example1", "example2", "custom"])
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--lambda", "--lambda-rule", dest="lam", required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--k-max", type=int, default=200)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("simulate", help="Monte Carlo study from a JSON config")
    _common(p, data=False)
    p.add_argument("--config", required=True)
    p.add_argument("--replications", type=int, help="override the config's replication count")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("forecast", help="rolling-window forecasts with prediction intervals")
    _common(p, data=False)
    p.add_argument("--input", required=True, help="CSV with the target and the covariate panel")
    p.add_argument("--target", default="0", help="target column name or 0-based index")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--lags", type=int, required=True)
    p.add_argument("--factors", type=int, default=0)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--lambda-grid", default=",".join(DEFAULT_LAMBDA_GRID))
    p.add_argument("--k", default="10")
    p.add_argument("--eta", type=float, default=1e-4)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--screen", action="store_true")
    p.add_argument("--n-star", type=int)
    p.set_defaults(func=cmd_forecast)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    if getattr(args, "level", 0.5) is not None and not 0 < getattr(args, "level", 0.5) < 1:
        parser.error("--level must lie in (0, 1)")
    for key in ("input", "x0", "config", "beta"):
        path = getattr(args, key, None)
        if path and not Path(path).is_file():
            print(f"ridgedebias: error: file not found: {path}", file=sys.stderr)
            return 2
    try:
        run = Run(args)
        args.func(args, run)
        run.finish()
    except UsageError as exc:
        print(f"ridgedebias: usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, DataError, json.JSONDecodeError) as exc:
        print(f"ridgedebias: input error: {exc}", file=sys.stderr)
        return 2
    except (RidgeDebiasError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"ridgedebias: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
