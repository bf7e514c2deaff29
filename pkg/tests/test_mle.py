"""Likelihood and estimator checks against finite differences and grid search."""

import numpy as np
import pytest

from fracmle.errors import DegeneratePosteriorError
from fracmle.mle import (ThetaParams, effect_posterior,
                         estimate_constant_drift_moments, estimate_fixed_effect,
                         estimate_joint, estimate_mu_fixed_sigma,
                         girsanov_log_density, individual_log_lambda, score,
                         total_log_likelihood)
from fracmle.stats import StatsBatch, SufficientStats


def _batch(u, v, prov=None):
    u = np.asarray(u, dtype=float)
    return StatsBatch(u=u, v=np.asarray(v, dtype=float),
                      trajectory_ids=np.arange(len(u)), provenance=prov or {})


def _direct_log_lambda(u, v, mu, s):
    """Textbook three-factor form; valid for v > 0 only."""
    return (-0.5 * np.log(1 + s * v)
            - v / (2 * (1 + s * v)) * (mu - u / v) ** 2
            + u ** 2 / (2 * v))


def test_log_lambda_matches_direct_form():
    rng = np.random.default_rng(1)
    for _ in range(50):
        u = rng.normal(scale=3)
        v = rng.uniform(0.1, 5)
        mu = rng.normal()
        s = rng.uniform(0, 4)
        got = individual_log_lambda(SufficientStats(u=u, v=v, steps=10),
                                    ThetaParams(mu, s))
        assert got == pytest.approx(_direct_log_lambda(u, v, mu, s), rel=1e-10)


def test_log_lambda_finite_at_v_zero():
    got = individual_log_lambda(SufficientStats(u=0.0, v=0.0, steps=10),
                                ThetaParams(2.0, 1.0))
    assert got == 0.0


def test_total_is_sum_and_singleton_matches_individual():
    b = _batch([1.0, -0.5, 2.0], [1.0, 0.5, 3.0])
    theta = ThetaParams(0.7, 0.9)
    total = total_log_likelihood(b, theta)
    parts = [individual_log_lambda(SufficientStats(u=b.u[i], v=b.v[i], steps=1),
                                   theta) for i in range(3)]
    assert total == pytest.approx(sum(parts), rel=1e-13)
    single = _batch([1.0], [1.0])
    assert total_log_likelihood(single, theta) == pytest.approx(parts[0])


def test_score_matches_finite_differences():
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = rng.integers(2, 10)
        b = _batch(rng.normal(scale=2, size=n), rng.uniform(0.1, 4, size=n))
        mu = rng.normal()
        s = rng.uniform(0.05, 3)
        theta = ThetaParams(mu, s)
        d_mu, d_s = score(b, theta)
        h = 1e-5
        fd_mu = (total_log_likelihood(b, ThetaParams(mu + h, s))
                 - total_log_likelihood(b, ThetaParams(mu - h, s))) / (2 * h)
        fd_s = (total_log_likelihood(b, ThetaParams(mu, s + h))
                - total_log_likelihood(b, ThetaParams(mu, s - h))) / (2 * h)
        assert d_mu == pytest.approx(fd_mu, rel=1e-6, abs=1e-8)
        assert d_s == pytest.approx(fd_s, rel=1e-6, abs=1e-8)


def test_fixed_effect_is_mu_profile_at_zero():
    b = _batch([2.0, 3.0, 1.0], [1.0, 2.0, 0.5])
    assert estimate_fixed_effect(b) == estimate_mu_fixed_sigma(b, 0.0)
    assert estimate_fixed_effect(b) == pytest.approx(np.sum(b.u) / np.sum(b.v))


def test_single_trajectory_fixed_effect_is_ratio():
    b = _batch([3.0], [1.5])
    assert estimate_fixed_effect(b) == pytest.approx(2.0)


def test_moment_estimator_constant_drift():
    rng = np.random.default_rng(3)
    vbar = 2.0
    u = rng.normal(loc=1.5 * vbar, scale=np.sqrt(vbar + 0.8 * vbar ** 2), size=50000)
    b = _batch(u, np.full_like(u, vbar))
    est = estimate_constant_drift_moments(b)
    assert est.mu == pytest.approx(1.5, abs=0.05)
    assert est.sigma0_sq == pytest.approx(0.8, abs=0.1)


def test_moment_estimator_clips_at_zero():
    b = _batch([1.0, 1.0, 1.0], [2.0, 2.0, 2.0])  # zero dispersion in u
    assert estimate_constant_drift_moments(b).sigma0_sq == 0.0


def _grid_search_mle(b, mu_range=(-5, 10), s_max=10.0):
    """Profiled grid-search oracle for the joint maximizer."""
    s_grid = np.linspace(0.0, s_max, 4001)
    best = (None, -np.inf)
    for s in s_grid:
        mu = estimate_mu_fixed_sigma(b, s)
        ll = total_log_likelihood(b, ThetaParams(mu, s))
        if ll > best[1]:
            best = (ThetaParams(mu, s), ll)
    # refine around the winner
    s0 = best[0].sigma0_sq
    for s in np.linspace(max(0.0, s0 - 0.01), s0 + 0.01, 2001):
        mu = estimate_mu_fixed_sigma(b, s)
        ll = total_log_likelihood(b, ThetaParams(mu, s))
        if ll > best[1]:
            best = (ThetaParams(mu, s), ll)
    return best[0]


def test_joint_estimator_against_grid_search():
    rng = np.random.default_rng(12)
    for _ in range(5):
        n = 30
        v = rng.uniform(0.5, 3.0, size=n)
        phi = rng.normal(1.0, np.sqrt(1.5), size=n)
        u = phi * v + rng.normal(size=n) * np.sqrt(v)
        b = _batch(u, v)
        est = estimate_joint(b)
        ref = _grid_search_mle(b)
        assert est.theta_hat.mu == pytest.approx(ref.mu, abs=2e-3)
        assert est.theta_hat.sigma0_sq == pytest.approx(ref.sigma0_sq, abs=2e-3)
        assert (total_log_likelihood(b, est.theta_hat)
                >= total_log_likelihood(b, ref) - 1e-8)


def test_joint_interior_solution_zeroes_score():
    rng = np.random.default_rng(7)
    v = rng.uniform(1.0, 2.0, size=40)
    phi = rng.normal(0.5, 1.2, size=40)
    u = phi * v + rng.normal(size=40) * np.sqrt(v)
    est = estimate_joint(_batch(u, v))
    assert est.converged and not est.boundary
    d_mu, d_s = score(_batch(u, v), est.theta_hat)
    assert abs(d_mu) < 1e-6
    assert abs(d_s) < 1e-6


def test_joint_boundary_when_dispersion_free():
    b = _batch([2.0, 4.0, 1.0], [1.0, 2.0, 0.5])  # u = 2v exactly
    est = estimate_joint(b)
    assert est.boundary
    assert est.theta_hat.sigma0_sq == 0.0
    assert est.theta_hat.mu == pytest.approx(2.0)


def test_joint_requires_two_trajectories():
    with pytest.raises(ValueError):
        estimate_joint(_batch([1.0], [1.0]))


def test_posterior_shrinkage():
    theta = ThetaParams(1.0, 2.0)
    post = effect_posterior(SufficientStats(u=6.0, v=3.0, steps=1), theta)
    denom = 1 + 2.0 * 3.0
    assert post.mean == pytest.approx((1.0 + 2.0 * 6.0) / denom)
    assert post.variance == pytest.approx(2.0 / denom)
    # no-data limit: posterior is the prior
    empty = effect_posterior(SufficientStats(u=0.0, v=0.0, steps=0), theta)
    assert (empty.mean, empty.variance) == (1.0, 2.0)


def test_posterior_degenerate_raises():
    with pytest.raises(DegeneratePosteriorError):
        effect_posterior(SufficientStats(u=1.0, v=1.0, steps=1),
                         ThetaParams(0.5, 0.0))


def test_girsanov_zero_q_is_unit_density():
    dm = np.array([0.1, -0.2, 0.3])
    dw = np.array([0.5, 0.5, 0.5])
    assert girsanov_log_density(np.zeros(4), dm, dw) == 0.0


def test_girsanov_alignment_check():
    with pytest.raises(ValueError):
        girsanov_log_density(np.zeros(4), np.zeros(4), np.zeros(3))


def test_log_lambda_matches_numerical_prior_integral():
    # integrate exp(psi u - psi^2 v / 2) against the N(mu, s) prior
    rng = np.random.default_rng(31)
    for _ in range(10):
        u = rng.normal(scale=2)
        v = rng.uniform(0.2, 4)
        mu = rng.normal()
        s = rng.uniform(0.1, 3)
        sd = np.sqrt(s)
        psi = np.linspace(mu - 12 * sd, mu + 12 * sd, 40001)
        integrand = np.exp(psi * u - 0.5 * psi ** 2 * v
                           - 0.5 * (psi - mu) ** 2 / s) / np.sqrt(2 * np.pi * s)
        log_num = np.log(np.trapezoid(integrand, psi))
        got = individual_log_lambda(SufficientStats(u=u, v=v, steps=1),
                                    ThetaParams(mu, s))
        assert got == pytest.approx(log_num, rel=1e-6, abs=1e-8)
