"""Gaussian-process regression trained on several rater scores per input."""

__version__ = "0.1.0"

from .data import (
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
)
from .dataset import Dataset, DatasetError, RatingSummary, summarize_ratings
from .linalg import Hyperparameters, NotPositiveDefiniteError
from .metrics import EvalReport, evaluate
from .models import (
    VARIANTS,
    PredictiveDensity,
    TrainedModel,
    fit,
    log_marginal,
    loglik_base,
    loglik_joint,
    loglik_repeat,
    point_scores,
    predict,
)
from .optimize import FitReport, OptimizerConfig, default_init, maximize, objective_and_gradient
from .pipeline import train_model
from .stats import TestResult, paired_t_test, steiger_z1
from .whitening import WhiteningTransform, apply_whitening, fit_whitening

__all__ = [
    "__version__",
    "SyntheticSpec",
    "generate_synthetic",
    "load_dataset",
    "load_model",
    "save_dataset",
    "save_model",
    "Dataset",
    "DatasetError",
    "RatingSummary",
    "summarize_ratings",
    "Hyperparameters",
    "NotPositiveDefiniteError",
    "EvalReport",
    "evaluate",
    "VARIANTS",
    "PredictiveDensity",
    "TrainedModel",
    "fit",
    "log_marginal",
    "loglik_base",
    "loglik_joint",
    "loglik_repeat",
    "point_scores",
    "predict",
    "FitReport",
    "OptimizerConfig",
    "default_init",
    "maximize",
    "objective_and_gradient",
    "train_model",
    "TestResult",
    "paired_t_test",
    "steiger_z1",
    "WhiteningTransform",
    "apply_whitening",
    "fit_whitening",
]
