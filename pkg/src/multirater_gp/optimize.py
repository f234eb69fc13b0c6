"""Maximum marginal-likelihood training of the GP hyperparameters."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, summarize_ratings
from .linalg import Hyperparameters
from .models import log_marginal, _check_variant

__all__ = [
    "OptimizerConfig",
    "FitReport",
    "RepeatTooLargeError",
    "ROUNDOFF_TOL",
    "objective_and_gradient",
    "default_init",
    "maximize",
]

log = logging.getLogger(__name__)

# relative slack on the Armijo test; accepted steps never lose more than this
ROUNDOFF_TOL = 1e-12


class RepeatTooLargeError(ValueError):
    """The repeat variant was asked to factor an NR x NR matrix over the size guard."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`maximize`.

    ``restarts`` counts starting points; the first is the initial
    hyperparameters unchanged, later ones multiply each of s, l, sigma by
    ``exp(U(-1, 1))``.
    """

    max_iters: int = 500
    grad_tol: float = 1e-6
    step_init: float = 0.1
    seed: int = 0
    restarts: int = 3
    armijo_c: float = 1e-4
    max_backtracks: int = 40
    repeat_size_limit: int = 4000

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.step_init > 0:
            raise ValueError("step_init must be > 0")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class FitReport:
    final_hp: Hyperparameters
    final_objective: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)
    grad_norm: float = float("nan")
    restart: int = 0
    restart_objectives: list = field(default_factory=list)

    def to_dict(self):
        return {
            "final_hp": self.final_hp.to_dict(),
            "final_objective": self.final_objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "restart": self.restart,
            "restart_objectives": list(self.restart_objectives),
            "objective_trace": list(self.objective_trace),
        }


def objective_and_gradient(ds: Dataset, variant: str, hp: Hyperparameters):
    """Training objective of ``variant`` and its gradient in log-hyperparameters."""
    value, grad = log_marginal(ds, variant, hp, with_grad=True)
    return value, grad


def default_init(ds: Dataset) -> Hyperparameters:
    """Data-driven starting point.

    s is the standard deviation of the row means, l the median pairwise
    distance among at most 1000 evenly spaced inputs, sigma the larger of
    0.1 s and the pooled within-row (biased) rating standard deviation.
    """
    if ds.n < 2:
        raise ValueError("default_init needs at least 2 rows")
    summary = summarize_ratings(ds)
    s = max(float(np.std(summary.mu_bar)), 1e-3)

    idx = np.unique(np.linspace(0, ds.n - 1, min(ds.n, 1000)).round().astype(int))
    Xs = ds.features[idx]
    diff = Xs[:, None, :] - Xs[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))[np.triu_indices(len(idx), k=1)]
    l = max(float(np.median(dist)), 1e-3)

    sigma = 0.1 * s
    if np.any(summary.r_counts > 1):
        pooled = float(np.sqrt(np.sum(summary.sq_dev) / np.sum(summary.r_counts)))
        sigma = max(sigma, pooled)
    return Hyperparameters.from_natural(s, l, sigma)


def _ascend(ds, variant, theta0, cfg: OptimizerConfig):
    """Gradient ascent with Barzilai-Borwein trial steps and Armijo backtracking."""

    def evaluate(theta):
        return objective_and_gradient(ds, variant, Hyperparameters.from_array(theta))

    theta = np.asarray(theta0, dtype=float)
    f, g = evaluate(theta)
    trace = [f]
    step = cfg.step_init / max(1.0, float(np.max(np.abs(g))))
    prev = None
    iters = 0
    while iters < cfg.max_iters and np.max(np.abs(g)) > cfg.grad_tol:
        if prev is not None:
            dtheta, dg = theta - prev[0], g - prev[1]
            curv = -float(dtheta @ dg)
            if curv > 0:
                step = float(dtheta @ dtheta) / curv
        step = min(step, 10.0 / max(float(np.max(np.abs(g))), 1e-300))
        gg = float(g @ g)
        for _ in range(cfg.max_backtracks):
            cand = theta + step * g
            try:
                f_new, g_new = evaluate(cand)
            except (np.linalg.LinAlgError, ValueError):
                f_new = -np.inf
            # improvements below round-off of f cannot be resolved; tolerate them
            slack = ROUNDOFF_TOL * max(1.0, abs(f))
            if np.isfinite(f_new) and f_new >= f + cfg.armijo_c * step * gg - slack:
                break
            step *= 0.5
        else:
            log.debug("line search stalled at iteration %d", iters)
            break
        prev = (theta, g)
        theta, f, g = cand, f_new, g_new
        trace.append(f)
        iters += 1
    return theta, f, g, iters, trace


def maximize(
    ds: Dataset,
    variant: str,
    cfg: OptimizerConfig | None = None,
    init: Hyperparameters | None = None,
    force_repeat: bool = False,
) -> FitReport:
    """Maximize the marginal log-likelihood of ``variant`` over hyperparameters.

    Deterministic for a fixed ``cfg.seed`` and ``init``. Returns the best
    restart; ties go to the earliest.

    Raises
    ------
    RepeatTooLargeError
        For ``variant="repeat"`` when the number of ratings exceeds
        ``cfg.repeat_size_limit`` and ``force_repeat`` is false.
    numpy.linalg.LinAlgError
        If every restart fails to factor its covariance.
    """
    _check_variant(variant)
    cfg = cfg or OptimizerConfig()
    n_ratings = int(np.sum(ds.r_counts))
    if variant == "repeat" and n_ratings > cfg.repeat_size_limit and not force_repeat:
        raise RepeatTooLargeError(
            f"repeat variant would factor a {n_ratings} x {n_ratings} matrix, over the "
            f"limit of {cfg.repeat_size_limit}; its cost grows as O(N^3 R^3). "
            "Use the joint variant or pass force_repeat."
        )
    if init is None:
        init = default_init(ds) if ds.n >= 2 else Hyperparameters(0.0, 0.0, 0.0)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    starts = [init.as_array()]
    for _ in range(cfg.restarts - 1):
        starts.append(init.as_array() + rng.uniform(-1.0, 1.0, size=3))

    best = None
    objectives = []
    last_error = None
    for k, theta0 in enumerate(starts):
        try:
            theta, f, g, iters, trace = _ascend(ds, variant, theta0, cfg)
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.warning("restart %d failed: %s", k, exc)
            objectives.append(None)
            last_error = exc
            continue
        objectives.append(f)
        gnorm = float(np.max(np.abs(g)))
        report = FitReport(
            Hyperparameters.from_array(theta), f, iters, gnorm <= cfg.grad_tol,
            trace, gnorm, k,
        )
        if best is None or f > best.final_objective:
            best = report
    if best is None:
        raise np.linalg.LinAlgError(f"all {len(starts)} restarts failed: {last_error}")
    best.restart_objectives = objectives
    return best
