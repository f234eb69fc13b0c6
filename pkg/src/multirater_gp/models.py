"""GP regression on multi-rater data: base, repeat and joint variants.

``base``
    A standard GP on the per-row mean rating.
``repeat``
    Every input repeated once per rating, all ratings used as separate
    targets. Exact but costs ``O((N R)^3)``.
``joint``
    One latent value per input; the likelihood of all ratings factorises
    into a Gaussian on the row means with noise ``sigma^2 / R_i`` times a
    rating-only term ``g(Y)``. Identical objective and predictions to
    ``repeat`` at ``O(N^3)`` cost.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, RatingSummary, summarize_ratings
from .linalg import (
    LOG_2PI,
    CholeskyFactor,
    Hyperparameters,
    chol_logdet,
    chol_solve,
    cholesky,
    kernel_matrix,
    sq_dists,
)
from .whitening import WhiteningTransform, apply_whitening

__all__ = [
    "VARIANTS",
    "TrainedModel",
    "PredictiveDensity",
    "log_g",
    "log_g_grad",
    "loglik_base",
    "loglik_repeat",
    "loglik_joint",
    "log_marginal",
    "fit",
    "predict",
    "point_scores",
]

log = logging.getLogger(__name__)

VARIANTS = ("base", "repeat", "joint")


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _gaussian_term(X, y, noise_var, hp, with_grad=False):
    """log N(y; 0, K(X, X) + diag(noise_var)) and optionally its gradient.

    The gradient is with respect to (log_s, log_l, log_sigma) and assumes
    ``noise_var`` is proportional to sigma^2. With C the covariance and
    alpha = C^-1 y, each component is 0.5 * sum((alpha alpha^T - C^-1) * dC).
    """
    d2 = sq_dists(X)
    K = hp.s**2 * np.exp(-0.5 * d2 / hp.l**2)
    C = K + np.diag(noise_var)
    L = cholesky(C)
    alpha = chol_solve(L, y)
    value = -0.5 * float(y @ alpha) - 0.5 * chol_logdet(L) - 0.5 * y.size * LOG_2PI
    if not with_grad:
        return value, None, L
    W = np.outer(alpha, alpha) - chol_solve(L, np.eye(y.size))
    grad = 0.5 * np.array([
        np.sum(W * (2.0 * K)),                 # dK/dlog_s = 2K
        np.sum(W * (K * d2)) / hp.l**2,        # dK/dlog_l = K d2 / l^2
        np.sum(np.diag(W) * (2.0 * noise_var)),
    ])
    return value, grad, L


def log_g(summary: RatingSummary, hp: Hyperparameters) -> float:
    """Log of the rating-only factor of the joint marginal likelihood.

    Per row: log N(eta_i; 0, sigma^2/R_i) + (2 - R_i)/2 log(2 pi sigma^2)
    - log R_i. Zero whenever every row has a single rating.
    """
    R = summary.r_counts.astype(float)
    s2 = hp.sigma**2
    log2pis2 = LOG_2PI + 2.0 * hp.log_sigma
    per_row = (
        -0.5 * (log2pis2 - np.log(R))
        - 0.5 * summary.sq_dev / s2
        + 0.5 * (2.0 - R) * log2pis2
        - np.log(R)
    )
    return float(np.sum(per_row))


def log_g_grad(summary: RatingSummary, hp: Hyperparameters) -> float:
    """d log g / d log_sigma = sum_i [-1 + R_i eta_i^2 / sigma^2 + (2 - R_i)]."""
    R = summary.r_counts.astype(float)
    return float(np.sum(-1.0 + summary.sq_dev / hp.sigma**2 + (2.0 - R)))


def loglik_base(X, y, hp: Hyperparameters) -> float:
    """Marginal log-likelihood of a standard GP with one target per row."""
    X = np.asarray(X, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if X.ndim == 1:
        X = X[:, None]
    if y.shape != (X.shape[0],):
        raise ValueError(f"expected {X.shape[0]} targets, got shape {y.shape}")
    value, _, _ = _gaussian_term(X, y, np.full(y.size, hp.sigma**2), hp)
    return value


def loglik_repeat(ds: Dataset, hp: Hyperparameters) -> float:
    """Marginal log-likelihood over inputs repeated once per rating."""
    return log_marginal(ds, "repeat", hp)[0]


def loglik_joint(ds: Dataset, hp: Hyperparameters) -> float:
    """Joint marginal log-likelihood of all ratings at O(N^3) cost."""
    return log_marginal(ds, "joint", hp)[0]


def log_marginal(ds: Dataset, variant: str, hp: Hyperparameters, with_grad=False):
    """Training objective of ``variant`` and, optionally, its gradient.

    Returns
    -------
    value : float
    grad : ndarray of shape (3,) or None
        Derivatives with respect to (log_s, log_l, log_sigma).
    """
    _check_variant(variant)
    s2 = hp.sigma**2
    if variant == "repeat":
        X_rep, y = ds.flat_targets()
        value, grad, _ = _gaussian_term(X_rep, y, np.full(y.size, s2), hp, with_grad)
        return value, grad
    summary = summarize_ratings(ds)
    if variant == "base":
        noise = np.full(ds.n, s2)
        return _gaussian_term(ds.features, summary.mu_bar, noise, hp, with_grad)[:2]
    noise = s2 / summary.r_counts
    value, grad, _ = _gaussian_term(ds.features, summary.mu_bar, noise, hp, with_grad)
    value += log_g(summary, hp)
    if with_grad:
        grad = grad.copy()
        grad[2] += log_g_grad(summary, hp)
    return value, grad


@dataclass(frozen=True)
class PredictiveDensity:
    """Gaussian predictive density over test outputs.

    ``var`` is the marginal output variance (latent variance plus sigma^2).
    ``cov`` holds the full latent covariance when it was requested.
    """

    mean: np.ndarray
    var: np.ndarray
    latent_var: np.ndarray
    noise_var: float
    cov: np.ndarray | None = None

    def __len__(self):
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Everything needed to predict: factor of the training covariance and weights.

    ``train_features`` are the kernel inputs after whitening; for the repeat
    variant they are the repeated rows, one per rating.
    """

    variant: str
    hp: Hyperparameters
    train_features: np.ndarray
    effective_targets: np.ndarray
    noise_scale: np.ndarray
    chol: CholeskyFactor
    alpha: np.ndarray
    offset: float = 0.0
    whitening: WhiteningTransform | None = field(default=None)


def fit(ds: Dataset, variant: str, hp: Hyperparameters, whitening=None) -> TrainedModel:
    """Factor the training covariance of ``variant`` under fixed hyperparameters.

    ``ds.features`` must already be whitened if ``whitening`` is given; the
    transform is only stored so that :func:`predict` can apply it to raw
    test inputs.
    """
    _check_variant(variant)
    s2 = hp.sigma**2
    if variant == "repeat":
        X, y = ds.flat_targets()
        noise = np.full(y.size, s2)
    else:
        summary = summarize_ratings(ds)
        X, y = ds.features, summary.mu_bar
        noise = np.full(ds.n, s2) if variant == "base" else s2 / summary.r_counts
    C = kernel_matrix(X, None, hp) + np.diag(noise)
    L = cholesky(C)
    alpha = chol_solve(L, y)
    if not np.all(np.isfinite(alpha)):
        raise np.linalg.LinAlgError("non-finite weights after solve")
    return TrainedModel(variant, hp, X, y, noise, L, alpha, ds.offset, whitening)


def predict(model: TrainedModel, Xhat, full_cov: bool = False, raw: bool = True) -> PredictiveDensity:
    """Predictive output density at the rows of ``Xhat``.

    Parameters
    ----------
    model : TrainedModel
    Xhat : array_like, shape (M, D)
        Test inputs. Raw features are whitened with the model's transform
        unless ``raw=False``.
    full_cov : bool
        Also return the M x M latent covariance.

    The mean has ``model.offset`` added back, so it is on the rating scale.
    """
    Xhat = np.asarray(Xhat, dtype=float)
    if Xhat.ndim == 1:
        Xhat = Xhat[None, :] if model.train_features.shape[1] > 1 else Xhat[:, None]
    if raw and model.whitening is not None:
        Xhat = apply_whitening(model.whitening, Xhat)
    D = model.train_features.shape[1]
    if Xhat.shape[1] != D:
        raise ValueError(f"expected {D} feature columns, got {Xhat.shape[1]}")
    hp = model.hp
    s2 = hp.sigma**2
    if Xhat.shape[0] == 0:
        empty = np.zeros(0)
        return PredictiveDensity(empty, empty, empty, s2, np.zeros((0, 0)) if full_cov else None)

    Ks = kernel_matrix(Xhat, model.train_features, hp)
    mean = Ks @ model.alpha + model.offset
    V = chol_solve(model.chol, Ks.T)
    cov = None
    if full_cov:
        cov = kernel_matrix(Xhat, None, hp) - Ks @ V
        cov = 0.5 * (cov + cov.T)
        latent_var = np.diag(cov).copy()
    else:
        latent_var = hp.s**2 - np.einsum("ij,ji->i", Ks, V)
    if np.any(latent_var < 0):
        worst = float(latent_var.min())
        if worst < -1e-8 * hp.s**2:
            log.warning("latent variance %.3g clamped to 0", worst)
        else:
            log.debug("latent variance %.3g clamped to 0", worst)
        latent_var = np.maximum(latent_var, 0.0)
    return PredictiveDensity(mean, latent_var + s2, latent_var, s2, cov)


def point_scores(pd: PredictiveDensity) -> np.ndarray:
    """Point prediction per test item: the predictive mean."""
    return pd.mean.copy()
