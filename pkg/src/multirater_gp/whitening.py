"""PCA whitening fit on training features."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

__all__ = ["WhiteningTransform", "fit_whitening", "apply_whitening"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WhiteningTransform:
    """Affine map ``x -> (x - mean) @ basis.T``.

    ``basis`` rows are principal directions divided by the square root of
    their eigenvalue. Directions with eigenvalue at or below
    ``eps * max_eigenvalue`` are dropped, so ``basis`` may have fewer rows
    than the input dimension; ``n_dropped`` records how many.
    """

    mean: np.ndarray
    basis: np.ndarray
    eps: float = 1e-8
    n_dropped: int = 0

    @property
    def in_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def out_dim(self) -> int:
        return self.basis.shape[0]

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "basis": self.basis.tolist(),
            "eps": self.eps,
            "n_dropped": self.n_dropped,
        }

    @classmethod
    def from_dict(cls, d):
        mean = np.asarray(d["mean"], dtype=float)
        basis = np.asarray(d["basis"], dtype=float).reshape(-1, mean.shape[0])
        return cls(mean, basis, float(d["eps"]), int(d["n_dropped"]))


def fit_whitening(X, eps: float = 1e-8) -> WhiteningTransform:
    """Estimate a whitening transform from the rows of ``X``.

    The covariance uses the unbiased ``N - 1`` normalization, matching
    ``np.cov``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 rows to estimate a covariance, got {X.shape[0]}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    top = evals.max()
    if not top > 0:
        raise ValueError("features have zero variance in every direction")
    keep = evals > eps * top
    # descending variance order
    order = np.argsort(evals[keep])[::-1]
    vals = evals[keep][order]
    vecs = evecs[:, keep][:, order]
    n_dropped = int(np.sum(~keep))
    if n_dropped:
        log.info("whitening dropped %d near-null direction(s)", n_dropped)
    basis = vecs.T / np.sqrt(vals)[:, None]
    return WhiteningTransform(mean, basis, float(eps), n_dropped)


def apply_whitening(t: WhiteningTransform, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != t.in_dim:
        raise ValueError(f"expected {t.in_dim} feature columns, got {X.shape[1]}")
    return (X - t.mean) @ t.basis.T
