"""Iteratively de-biased ridge regression, ridge screening and finite-sample inference."""

from __future__ import annotations

__version__ = "0.1.0"

from .dataset import Dataset, LagSpec, center, lag_embed, load_csv, pca_factors
from .errors import DataError, ModelError, NonEstimableContrast, RidgeDebiasError, StudyError
from .inference import (
    CovarianceModel,
    confidence_interval,
    contrast_test,
    covariance_debiased,
    prediction_interval,
)
from .montecarlo import (
    DgpSpec,
    EstimatorConfig,
    StudyConfig,
    generate_example1,
    generate_example2,
    run_study,
)
from .screening import Holdout, KFold, screen, tune, two_stage_fit
from .spectral import (
    DebiasedFit,
    RidgeConfig,
    SpectralCache,
    bias_oracle,
    debias,
    decompose,
    least_squares_pinv,
    ridge_fit,
)
from .tradeoff import mse_curve, regime_classify

__all__ = [
    "CovarianceModel", "DataError", "Dataset", "DebiasedFit", "DgpSpec", "EstimatorConfig",
    "Holdout", "KFold", "LagSpec", "ModelError", "NonEstimableContrast", "RidgeConfig",
    "RidgeDebiasError", "SpectralCache", "StudyConfig", "StudyError", "bias_oracle", "center",
    "confidence_interval", "contrast_test", "covariance_debiased", "debias", "decompose",
    "generate_example1", "generate_example2", "lag_embed", "least_squares_pinv", "load_csv",
    "mse_curve", "pca_factors", "prediction_interval", "regime_classify", "ridge_fit",
    "run_study", "screen", "tune", "two_stage_fit",
]
