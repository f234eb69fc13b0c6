"""Significance tests for comparing two systems scored on the same items."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .linalg import std_normal_cdf

__all__ = ["TestResult", "t_cdf", "paired_t_test", "steiger_z1"]


@dataclass(frozen=True)
class TestResult:
    """Two-tailed test outcome. ``degenerate`` marks zero-variance inputs."""

    statistic: float
    p_value: float
    n: int
    degenerate: bool = False

    __test__ = False  # not a pytest class

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "degenerate": self.degenerate,
        }


def _two_tailed_t(t: float, df: float) -> float:
    # P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    if math.isinf(t):
        return 0.0
    return float(betainc(0.5 * df, 0.5, df / (df + t * t)))


def t_cdf(t: float, df: float) -> float:
    """Student-t CDF from the regularized incomplete beta function."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    half_tail = 0.5 * _two_tailed_t(t, df)
    return 1.0 - half_tail if t > 0 else half_tail


def paired_t_test(a, b) -> TestResult:
    """Two-tailed paired t-test on per-item losses of two systems.

    Zero-variance differences do not raise: all-zero differences give
    p = 1, a constant nonzero difference gives p = 0, both flagged.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"expected two equal-length vectors, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 items")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TestResult(0.0, 1.0, n, degenerate=True)
        return TestResult(math.copysign(math.inf, mean), 0.0, n, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return TestResult(t, min(1.0, _two_tailed_t(t, n - 1)), n)


def steiger_z1(r_1ref: float, r_2ref: float, r_12: float, n: int) -> TestResult:
    """Compare two dependent correlations that share a reference variable.

    Steiger's Z1* with pooled correlation. Both correlations are Fisher
    transformed, z_k = atanh(r_kref). Under the null they share the pooled
    value rbar = (r_1ref + r_2ref) / 2, and the correlation between z_1 and
    z_2 is

        psi  = r_12 (1 - 2 rbar^2) - rbar^2 (1 - 2 rbar^2 - r_12^2) / 2
        sbar = psi / (1 - rbar^2)^2

    so var(z_1 - z_2) = (2 - 2 sbar) / (n - 3) and

        Z = (z_1 - z_2) sqrt((n - 3) / (2 - 2 sbar)),

    referred to the standard normal, two-tailed.
    """
    if n < 4:
        raise ValueError("steiger_z1 needs n >= 4")
    for name, r in (("r_1ref", r_1ref), ("r_2ref", r_2ref)):
        if not -1.0 < r < 1.0:
            raise ValueError(f"{name} must lie strictly inside (-1, 1), got {r}")
    if r_1ref == r_2ref and -1.0 <= r_12 <= 1.0:
        # identical systems give r_12 = 1, where the variance term is 0/0
        return TestResult(0.0, 1.0, n, degenerate=abs(r_12) == 1.0)
    if not -1.0 < r_12 < 1.0:
        raise ValueError(f"r_12 must lie strictly inside (-1, 1), got {r_12}")
    rbar = 0.5 * (r_1ref + r_2ref)
    rbar2 = rbar * rbar
    psi = r_12 * (1.0 - 2.0 * rbar2) - 0.5 * rbar2 * (1.0 - 2.0 * rbar2 - r_12 * r_12)
    sbar = psi / (1.0 - rbar2) ** 2
    denom = 2.0 - 2.0 * sbar
    if not denom > 0:
        raise ValueError("correlations imply a non-positive variance for z1 - z2")
    z = (math.atanh(r_1ref) - math.atanh(r_2ref)) * math.sqrt((n - 3) / denom)
    p = 2.0 * std_normal_cdf(-abs(z))
    return TestResult(z, min(1.0, p), n)
