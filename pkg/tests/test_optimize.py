import math

import numpy as np
import pytest

from multirater_gp.data import SyntheticSpec, generate_synthetic
from multirater_gp.dataset import Dataset, summarize_ratings
from multirater_gp.linalg import Hyperparameters
from multirater_gp.models import VARIANTS, log_marginal
from multirater_gp.optimize import (
    ROUNDOFF_TOL,
    OptimizerConfig,
    RepeatTooLargeError,
    default_init,
    maximize,
    objective_and_gradient,
)

from .conftest import random_instance


def central_difference(ds, variant, hp, h=1e-5):
    theta = hp.as_array()
    out = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        up = log_marginal(ds, variant, Hyperparameters.from_array(theta + e))[0]
        down = log_marginal(ds, variant, Hyperparameters.from_array(theta - e))[0]
        out[k] = (up - down) / (2 * h)
    return out


@pytest.mark.parametrize("variant", VARIANTS)
def test_gradient_matches_finite_differences(rng, variant):
    for _ in range(15):
        ds, hp = random_instance(rng, n_max=10, r_choices=(1, 2, 3, 4))
        f, g = objective_and_gradient(ds, variant, hp)
        fd = central_difference(ds, variant, hp)
        assert f == log_marginal(ds, variant, hp)[0]
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


def test_noise_gradient_vanishes_at_scalar_mle():
    # with s -> 0 the joint objective is sum_r log N(y_r; 0, sigma^2),
    # maximized at sigma^2 = mean(y_r^2)
    ratings = [1.0, 2.0, 4.0]
    sigma_hat = math.sqrt(np.mean(np.square(ratings)))
    ds = Dataset([[0.0]], [ratings], -10, 10)
    hp = Hyperparameters(-30.0, 0.0, math.log(sigma_hat))
    _, g = objective_and_gradient(ds, "joint", hp)
    assert abs(g[2]) < 1e-9
    _, g_off = objective_and_gradient(ds, "joint", Hyperparameters(-30.0, 0.0, math.log(sigma_hat) + 0.1))
    assert g_off[2] < -0.1


def test_single_rater_joint_gradient_equals_base(rng):
    for _ in range(10):
        ds, hp = random_instance(rng, r_choices=(1,))
        fj, gj = objective_and_gradient(ds, "joint", hp)
        fb, gb = objective_and_gradient(ds, "base", hp)
        assert fj == pytest.approx(fb, abs=1e-10)
        np.testing.assert_allclose(gj, gb, rtol=0, atol=1e-10)


class TestDefaultInit:
    def test_scale_floor_for_constant_targets(self):
        ds = Dataset([[0.0], [1.0], [2.0]], [[4], [4], [4]], 0, 10)
        assert default_init(ds).s == pytest.approx(1e-3)

    def test_length_from_single_distance(self):
        ds = Dataset([[0.0, 0.0], [3.0, 0.0]], [[1], [5]], 0, 10)
        assert default_init(ds).l == pytest.approx(3.0)

    def test_noise_from_within_row_spread(self):
        ds = Dataset([[0.0], [1.0]], [[2.2, 3.8], [6.2, 7.8]], 0, 10)
        init = default_init(ds)
        assert init.s == pytest.approx(2.0)
        assert init.sigma == pytest.approx(0.8)

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            default_init(Dataset([[0.0]], [[1]], 0, 10))


class TestMaximize:
    def test_single_point_terminates_monotonically(self):
        ds = Dataset([[0.0]], [[3.0]], -10, 10)
        rep = maximize(ds, "base", OptimizerConfig(max_iters=200, restarts=2))
        trace = np.array(rep.objective_trace)
        assert rep.iterations <= 200
        assert np.all(np.diff(trace) >= -ROUNDOFF_TOL * np.abs(trace[:-1]).clip(1))
        # the optimum is s^2 + sigma^2 = y^2
        assert rep.final_hp.s**2 + rep.final_hp.sigma**2 == pytest.approx(9.0, rel=1e-4)

    def test_trace_nondecreasing_and_deterministic(self):
        train, _, _ = generate_synthetic(SyntheticSpec(n_train=40, n_test=1, raters=3, seed=3))
        ds = train.centered()
        cfg = OptimizerConfig(seed=11)
        a = maximize(ds, "joint", cfg)
        b = maximize(ds, "joint", cfg)
        assert a.to_dict() == b.to_dict()
        trace = np.array(a.objective_trace)
        assert np.all(np.diff(trace) >= -ROUNDOFF_TOL * np.abs(trace[:-1]).clip(1))
        assert a.converged
        assert a.grad_norm <= cfg.grad_tol
        assert len(a.restart_objectives) == cfg.restarts
        assert a.final_objective == max(o for o in a.restart_objectives if o is not None)

    def test_joint_and_repeat_optimize_identically(self):
        for seed in range(5):
            spec = SyntheticSpec(n_train=10, n_test=1, raters=4, seed=seed, dim=2)
            train, _, _ = generate_synthetic(spec)
            ds = train.centered()
            cfg = OptimizerConfig(seed=seed, restarts=2)
            j = maximize(ds, "joint", cfg)
            r = maximize(ds, "repeat", cfg)
            assert abs(j.final_objective - r.final_objective) <= 1e-6
            np.testing.assert_allclose(
                j.final_hp.as_array(), r.final_hp.as_array(), rtol=0, atol=1e-4
            )

    def test_repeat_size_guard(self):
        train, _, _ = generate_synthetic(SyntheticSpec(n_train=30, n_test=1, raters=5))
        cfg = OptimizerConfig(repeat_size_limit=100, max_iters=2, restarts=1)
        with pytest.raises(RepeatTooLargeError, match=r"O\(N\^3 R\^3\)"):
            maximize(train.centered(), "repeat", cfg)
        rep = maximize(train.centered(), "repeat", cfg, force_repeat=True)
        assert rep.iterations <= 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(max_iters=0)
        with pytest.raises(ValueError):
            OptimizerConfig(grad_tol=0.0)

    def test_recovers_noise_on_moderate_problem(self):
        spec = SyntheticSpec(n_train=150, n_test=1, raters=5, sigma=0.8, rounded=False, seed=1)
        train, _, _ = generate_synthetic(spec)
        rep = maximize(train.centered(), "joint", OptimizerConfig(restarts=1))
        assert rep.final_hp.sigma == pytest.approx(0.8, rel=0.15)
        pooled = math.sqrt(np.mean(summarize_ratings(train).eta_bar ** 2) * 5 / 4)
        assert pooled == pytest.approx(0.8, rel=0.1)
