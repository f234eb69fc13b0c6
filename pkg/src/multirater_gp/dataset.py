"""Multi-rater datasets and their per-row rating summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DatasetError", "Dataset", "RatingSummary", "summarize_ratings"]


class DatasetError(ValueError):
    """A dataset violates its schema (shape, range or missing ratings)."""


class Dataset:
    """Input features paired with one or more ratings per row.

    Ratings are held in an ``N x R_max`` float array padded with NaN, so rows
    may carry different numbers of raters.

    Parameters
    ----------
    features : array_like, shape (N, D)
    ratings : array_like of shape (N, R) or a list of N rating sequences
    score_min, score_max : int
        Inclusive range every rating must fall in.
    offset : float
        Constant subtracted from every rating before it reaches a model.
        The GP prior has zero mean, so centering on the score range
        midpoint keeps the prior sensible; predictions add it back.
    """

    def __init__(self, features, ratings, score_min, score_max, offset=0.0):
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DatasetError(f"features must be a non-empty N x D array, got {X.shape}")
        if not np.all(np.isfinite(X)):
            row = int(np.argwhere(~np.isfinite(X))[0, 0])
            raise DatasetError(f"row {row}: non-finite feature value")
        self.features = X
        self.ratings = _pad_ratings(ratings, X.shape[0])
        self.score_min = int(score_min)
        self.score_max = int(score_max)
        if self.score_min >= self.score_max:
            raise DatasetError(
                f"score_min ({self.score_min}) must be below score_max ({self.score_max})"
            )
        present = ~np.isnan(self.ratings)
        bad = present & (
            (self.ratings < self.score_min) | (self.ratings > self.score_max)
        )
        if bad.any():
            i, r = np.argwhere(bad)[0]
            raise DatasetError(
                f"row {i}: rating {self.ratings[i, r]:g} outside "
                f"[{self.score_min}, {self.score_max}]"
            )
        self.offset = float(offset)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def r_counts(self) -> np.ndarray:
        return np.sum(~np.isnan(self.ratings), axis=1)

    @property
    def is_rectangular(self) -> bool:
        return bool(np.all(self.r_counts == self.ratings.shape[1]))

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.score_min + self.score_max)

    def rating_rows(self) -> list[np.ndarray]:
        return [row[~np.isnan(row)] for row in self.ratings]

    def centered(self, offset=None) -> "Dataset":
        """Copy with ``offset`` set (default: the score range midpoint)."""
        off = self.midpoint if offset is None else offset
        return Dataset(self.features, self.ratings, self.score_min, self.score_max, off)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx], self.ratings[idx], self.score_min, self.score_max,
            self.offset,
        )

    def flat_targets(self):
        """Repeated inputs and row-major flattened centered ratings."""
        counts = self.r_counts
        X_rep = np.repeat(self.features, counts, axis=0)
        y = self.ratings[~np.isnan(self.ratings)] - self.offset
        return X_rep, y

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.score_min == other.score_min
            and self.score_max == other.score_max
            and self.offset == other.offset
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.ratings, other.ratings, equal_nan=True)
        )

    def __repr__(self):
        return (
            f"Dataset(n={self.n}, dim={self.dim}, raters={self.ratings.shape[1]}, "
            f"range=[{self.score_min}, {self.score_max}], offset={self.offset:g})"
        )


def _pad_ratings(ratings, n):
    if isinstance(ratings, np.ndarray) and ratings.ndim == 2:
        Y = ratings.astype(float)
    else:
        rows = [np.atleast_1d(np.asarray(r, dtype=float)) for r in ratings]
        width = max((len(r) for r in rows), default=0)
        Y = np.full((len(rows), width), np.nan)
        for i, r in enumerate(rows):
            Y[i, : len(r)] = r
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != n:
        raise DatasetError(f"{n} feature rows but {Y.shape[0]} rating rows")
    if np.any(np.isinf(Y)):
        row = int(np.argwhere(np.isinf(Y))[0, 0])
        raise DatasetError(f"row {row}: infinite rating")
    empty = np.all(np.isnan(Y), axis=1) if Y.shape[1] else np.ones(n, bool)
    if empty.any():
        raise DatasetError(f"row {int(np.argmax(empty))}: no ratings")
    return Y


@dataclass(frozen=True)
class RatingSummary:
    """Per-row rating mean, biased standard deviation and rater count.

    ``sq_dev`` is the within-row sum of squared deviations, ``R * eta_bar**2``,
    kept separately to avoid a square/sqrt round trip in the likelihood.
    """

    mu_bar: np.ndarray
    eta_bar: np.ndarray
    r_counts: np.ndarray
    sq_dev: np.ndarray


def summarize_ratings(ds: Dataset) -> RatingSummary:
    """Mean and biased (divide-by-R) standard deviation of each row's ratings.

    Both are taken after subtracting ``ds.offset``; the deviation is
    unaffected by it. Row order of ratings does not matter.
    """
    Y = ds.ratings - ds.offset
    counts = np.sum(~np.isnan(Y), axis=1)
    if np.any(counts == 0):
        raise DatasetError(f"row {int(np.argmin(counts))}: no ratings")
    mu = np.nansum(Y, axis=1) / counts
    sq_dev = np.nansum((Y - mu[:, None]) ** 2, axis=1)
    eta = np.sqrt(sq_dev / counts)
    return RatingSummary(mu, eta, counts, sq_dev)
