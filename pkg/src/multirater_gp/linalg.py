"""Dense linear algebra and Gaussian primitives.

Everything here is pure: no module state, safe to call concurrently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf
from scipy.special import ndtr

__all__ = [
    "Hyperparameters",
    "CholeskyFactor",
    "NotPositiveDefiniteError",
    "sq_dists",
    "kernel_eval",
    "kernel_matrix",
    "cholesky",
    "chol_solve",
    "chol_logdet",
    "gaussian_logpdf",
    "std_normal_cdf",
]

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a matrix cannot be factored even after jitter escalation."""

    def __init__(self, message, minor=None, jitter=None):
        super().__init__(message)
        self.minor = minor
        self.jitter = jitter


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel scale, kernel length and observation noise, stored as logs."""

    log_s: float
    log_l: float
    log_sigma: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError(f"hyperparameters must be finite, got {self}")

    @classmethod
    def from_natural(cls, s, l, sigma):
        return cls(float(np.log(s)), float(np.log(l)), float(np.log(sigma)))

    @classmethod
    def from_array(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(float(theta[0]), float(theta[1]), float(theta[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.log_s, self.log_l, self.log_sigma], dtype=float)

    @property
    def s(self) -> float:
        return float(np.exp(self.log_s))

    @property
    def l(self) -> float:  # noqa: E743
        return float(np.exp(self.log_l))

    @property
    def sigma(self) -> float:
        return float(np.exp(self.log_sigma))

    def to_dict(self):
        return {
            "log_s": self.log_s, "log_l": self.log_l, "log_sigma": self.log_sigma,
            "s": self.s, "l": self.l, "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, d):
        """Inverse of ``to_dict``; only the log-domain entries are read."""
        return cls(float(d["log_s"]), float(d["log_l"]), float(d["log_sigma"]))


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower factor ``L`` with ``A + jitter*I = L @ L.T``."""

    lower: np.ndarray
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def _as_2d(X, name):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {X.shape}")
    return X


def sq_dists(A, B=None) -> np.ndarray:
    """Pairwise squared Euclidean distances between the rows of A and B.

    Uses ``|a|^2 + |b|^2 - 2 a.b`` so the bulk of the work is one matrix
    product; negative round-off is clamped to zero. With ``B=None`` the
    result is exactly symmetric with a zero diagonal.
    """
    A = _as_2d(A, "A")
    symmetric = B is None
    B = A if symmetric else _as_2d(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(
            f"dimension mismatch: A has {A.shape[1]} columns, B has {B.shape[1]}"
        )
    aa = np.einsum("ij,ij->i", A, A)
    bb = aa if symmetric else np.einsum("ij,ij->i", B, B)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    if symmetric:
        d2 = 0.5 * (d2 + d2.T)
        np.fill_diagonal(d2, 0.0)
    return d2


def kernel_eval(xi, xj, hp: Hyperparameters) -> float:
    """Squared-exponential kernel ``s^2 exp(-|xi - xj|^2 / (2 l^2))``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    if xi.shape != xj.shape:
        raise ValueError(f"dimension mismatch: {xi.shape} vs {xj.shape}")
    d = xi - xj
    return hp.s**2 * float(np.exp(-0.5 * float(d @ d) / hp.l**2))


def kernel_matrix(A, B, hp: Hyperparameters) -> np.ndarray:
    """Squared-exponential kernel between the rows of A and B.

    Pass ``B=None`` for the symmetric training kernel ``K(A, A)``.
    """
    d2 = sq_dists(A, B)
    return hp.s**2 * np.exp(-0.5 * d2 / hp.l**2)


def cholesky(A, jitter: float = 0.0) -> CholeskyFactor:
    """Factor ``A + jitter*I``, escalating the jitter on failure.

    If the first attempt fails, the jitter restarts at ``1e-10 * trace/dim``
    (when it was zero) and is multiplied by 10 per retry, up to
    ``1e-2 * trace/dim``. The jitter actually used is stored on the result.

    Raises
    ------
    NotPositiveDefiniteError
        If no jitter under the cap yields a factorization. ``minor`` holds
        the order of the smallest leading minor that was not positive.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    scale = np.max(np.abs(A))
    if np.max(np.abs(A - A.T)) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise ValueError("matrix is not symmetric")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")

    n = A.shape[0]
    mean_diag = float(np.trace(A)) / n
    cap = 1e-2 * mean_diag
    jitter = float(jitter)
    while True:
        work = A + jitter * np.eye(n) if jitter else A.copy()
        L, info = dpotrf(work, lower=1, clean=1, overwrite_a=1)
        if info == 0:
            if jitter:
                log.info("cholesky succeeded with jitter %.3g", jitter)
            return CholeskyFactor(np.asarray(L), jitter)
        if info < 0:
            raise ValueError(f"dpotrf rejected argument {-info}")
        minor = int(info)
        jitter = 1e-10 * mean_diag if jitter == 0.0 else jitter * 10.0
        if not jitter > 0.0 or jitter > cap * (1.0 + 1e-9):
            raise NotPositiveDefiniteError(
                f"matrix of order {n} is not positive definite: leading minor "
                f"of order {minor} failed with jitter up to {cap:.3g}",
                minor=minor,
                jitter=jitter,
            )


def chol_solve(L: CholeskyFactor, b) -> np.ndarray:
    """Solve ``A x = b`` given the Cholesky factor of ``A``."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != L.dim:
        raise ValueError(f"shape mismatch: factor is {L.dim}, rhs has {b.shape[0]} rows")
    return cho_solve((L.lower, True), b, check_finite=False)


def chol_logdet(L: CholeskyFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(L.lower))))


def gaussian_logpdf(y, mean, cov_factor: CholeskyFactor) -> float:
    """Multivariate normal log-density with covariance given by its factor."""
    r = np.atleast_1d(np.asarray(y, dtype=float) - np.asarray(mean, dtype=float))
    if r.shape != (cov_factor.dim,):
        raise ValueError(f"shape mismatch: residual {r.shape}, factor {cov_factor.dim}")
    alpha = chol_solve(cov_factor, r)
    return float(-0.5 * r @ alpha - 0.5 * chol_logdet(cov_factor) - 0.5 * r.size * LOG_2PI)


def std_normal_cdf(z):
    """Standard normal CDF; scalar in, float out, arrays elementwise."""
    out = ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out
