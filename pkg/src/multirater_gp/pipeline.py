"""End-to-end training: whitening, centering, hyperparameter search, factorization."""

from __future__ import annotations

from .dataset import Dataset
from .models import TrainedModel, fit
from .optimize import FitReport, OptimizerConfig, maximize
from .whitening import apply_whitening, fit_whitening

__all__ = ["train_model", "prepare_training_data"]


def prepare_training_data(ds: Dataset, whiten: bool = True, center: bool = True):
    """Whitened, centered copy of ``ds`` and the whitening transform (or None)."""
    transform = None
    X = ds.features
    if whiten:
        transform = fit_whitening(X)
        X = apply_whitening(transform, X)
    offset = ds.midpoint if center else 0.0
    return Dataset(X, ds.ratings, ds.score_min, ds.score_max, offset), transform


def train_model(
    ds: Dataset,
    variant: str,
    cfg: OptimizerConfig | None = None,
    whiten: bool = True,
    center: bool = True,
    init=None,
    force_repeat: bool = False,
) -> tuple[TrainedModel, FitReport, Dataset]:
    """Optimize hyperparameters for ``variant`` and fit the final model.

    Returns the model, the optimizer report and the prepared training set
    (which is what a model file stores).
    """
    prepared, transform = prepare_training_data(ds, whiten=whiten, center=center)
    report = maximize(prepared, variant, cfg, init=init, force_repeat=force_repeat)
    model = fit(prepared, variant, report.final_hp, whitening=transform)
    return model, report, prepared
