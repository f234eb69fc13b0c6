"""Scoring predictions against multi-rater references.

Scalar metrics (PCC, MSE) compare rounded predicted means to rounded mean
ratings. The distributional metric is a discrete KL divergence between each
item's rater histogram and the predictive Gaussian binned onto the integer
scores. Logs are natural, so KL is in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import std_normal_cdf

__all__ = [
    "PROB_FLOOR",
    "DiscreteDistribution",
    "EvalReport",
    "round_half_away",
    "round_and_clamp",
    "pcc",
    "mse",
    "reference_distribution",
    "discretize_predictive",
    "kl_divergence",
    "evaluate",
]

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    score_min: int
    score_max: int
    probs: np.ndarray

    def __post_init__(self):
        if self.probs.shape != (self.score_max - self.score_min + 1,):
            raise ValueError(
                f"expected {self.score_max - self.score_min + 1} probabilities, "
                f"got shape {self.probs.shape}"
            )

    @property
    def scores(self) -> np.ndarray:
        return np.arange(self.score_min, self.score_max + 1)

    def __getitem__(self, score: int) -> float:
        return float(self.probs[score - self.score_min])


@dataclass
class EvalReport:
    pcc: float
    mse: float
    kl: float
    per_item_sq_err: np.ndarray
    per_item_kl: np.ndarray
    pred_scores: np.ndarray
    ref_scores: np.ndarray

    def to_dict(self):
        return {
            "pcc": None if math.isnan(self.pcc) else self.pcc,
            "mse": self.mse,
            "kl": self.kl,
            "n_items": int(self.per_item_kl.size),
            "per_item_sq_err": self.per_item_sq_err.tolist(),
            "per_item_kl": self.per_item_kl.tolist(),
            "pred_scores": self.pred_scores.tolist(),
            "ref_scores": self.ref_scores.tolist(),
        }


def round_half_away(y):
    """Round to the nearest integer, ties away from zero (numpy rounds ties to even)."""
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.floor(np.abs(y) + 0.5)


def round_and_clamp(y, score_range):
    lo, hi = score_range
    out = np.clip(round_half_away(y), lo, hi).astype(int)
    return int(out) if out.ndim == 0 else out


def pcc(a, b) -> float:
    """Sample Pearson correlation. Raises if either input is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"expected two equal-length vectors, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValueError("need at least 2 items for a correlation")
    da = a - a.mean()
    db = b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        raise ValueError("correlation undefined for a constant input")
    r = float(da @ db) / math.sqrt(saa * sbb)
    return max(-1.0, min(1.0, r))


def mse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def reference_distribution(ratings_row, score_range) -> DiscreteDistribution:
    """Fraction of raters giving each integer score."""
    lo, hi = score_range
    row = np.asarray(ratings_row, dtype=float)
    row = row[~np.isnan(row)]
    if row.size == 0:
        raise ValueError("empty rating row")
    scores = row.astype(int)
    if np.any(scores != row):
        raise ValueError("reference ratings must be integers")
    if scores.min() < lo or scores.max() > hi:
        raise ValueError(f"rating outside [{lo}, {hi}]")
    counts = np.bincount(scores - lo, minlength=hi - lo + 1)
    return DiscreteDistribution(lo, hi, counts / row.size)


def discretize_predictive(mean: float, var: float, score_range) -> DiscreteDistribution:
    """Gaussian mass on each integer bin ``[c - 0.5, c + 0.5]``, renormalized.

    Bin masses are floored at ``PROB_FLOOR`` before renormalizing so that
    the KL divergence against any reference stays finite.
    """
    if not var > 0:
        raise ValueError(f"variance must be positive, got {var}")
    lo, hi = score_range
    sd = math.sqrt(var)
    edges = np.arange(lo, hi + 2) - 0.5
    z = (edges - mean) / sd
    za, zb = z[:-1], z[1:]
    # take differences on the tail nearest each bin to avoid cancellation
    mass = np.where(
        za >= 0,
        std_normal_cdf(-za) - std_normal_cdf(-zb),
        np.where(
            zb <= 0,
            std_normal_cdf(zb) - std_normal_cdf(za),
            1.0 - std_normal_cdf(za) - std_normal_cdf(-zb),
        ),
    )
    mass = np.maximum(mass, PROB_FLOOR)
    return DiscreteDistribution(lo, hi, mass / mass.sum())


def kl_divergence(ref: DiscreteDistribution, hyp: DiscreteDistribution) -> float:
    """sum_c ref(c) log(ref(c) / hyp(c)); bins with ref(c) = 0 contribute nothing."""
    if (ref.score_min, ref.score_max) != (hyp.score_min, hyp.score_max):
        raise ValueError("distributions cover different score ranges")
    p, q = ref.probs, hyp.probs
    nz = p > 0
    if np.any(q[nz] <= 0):
        raise ValueError("hypothesis has zero mass where the reference does not")
    return max(0.0, float(np.sum(p[nz] * np.log(p[nz] / q[nz]))))


def evaluate(pd, test_ratings, score_range) -> EvalReport:
    """PCC, MSE and mean discrete KL of a predictive density against raters.

    ``pd`` needs ``mean`` and ``var`` arrays (a PredictiveDensity, or any
    object with those attributes). ``test_ratings`` is N x R, NaN-padded
    for ragged rows. PCC is NaN when either rounded vector is constant.
    """
    Y = np.asarray(test_ratings, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    mean = np.asarray(pd.mean, dtype=float)
    var = np.asarray(pd.var, dtype=float)
    if mean.shape != (Y.shape[0],):
        raise ValueError(f"{mean.shape[0]} predictions for {Y.shape[0]} test rows")
    pred = round_and_clamp(mean, score_range)
    ref = round_and_clamp(np.nanmean(Y, axis=1), score_range)
    sq = (pred - ref).astype(float) ** 2
    kls = np.array([
        kl_divergence(
            reference_distribution(row, score_range),
            discretize_predictive(m, v, score_range),
        )
        for row, m, v in zip(Y, mean, var)
    ])
    try:
        r = pcc(pred, ref)
    except ValueError:
        r = float("nan")
    return EvalReport(r, float(sq.mean()), float(kls.mean()), sq, kls, pred, ref)
