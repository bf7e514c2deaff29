"""Exact random-effects likelihood and maximum-likelihood estimators.

Everything here is a function of the per-trajectory sufficient statistics
(u_i, v_i) alone. The individual marginal likelihood for a Gaussian effect
N(mu, sigma0_sq) has the closed form

    lambda_i = (1 + s v)^(-1/2) exp[-v/(2(1+s v)) (mu - u/v)^2] exp(u^2 / 2v)

with s = sigma0_sq; it is always evaluated through the algebraically
equivalent cancellation-free regrouping

    log lambda_i = -log1p(s v)/2 + (mu u - mu^2 v/2 + s u^2/2) / (1 + s v),

which stays finite at v = 0.

The joint estimator profiles mu out (it is explicit given sigma0_sq) and
root-finds the scalar sigma0_sq score on [0, inf), reporting a boundary
solution sigma0_sq = 0 when the profiled score is nonpositive on the whole
ray.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import DegeneratePosteriorError
from .stats import StatsBatch, SufficientStats

SCORE_TOL_PER_TRAJECTORY = 1e-8
PARAM_TOL = 1e-10
MAX_ITER = 200


@dataclass(frozen=True)
class ThetaParams:
    mu: float
    sigma0_sq: float

    def __post_init__(self):
        if self.sigma0_sq < 0:
            raise ValueError(f"sigma0_sq must be >= 0, got {self.sigma0_sq}")


@dataclass(frozen=True)
class EffectEstimate:
    theta_hat: ThetaParams
    log_likelihood: float
    iterations: int
    boundary: bool
    converged: bool
    gradient_norm: float

    def to_json(self, path, provenance: dict | None = None) -> None:
        payload = {
            "theta_hat": {"mu": self.theta_hat.mu,
                          "sigma0_sq": self.theta_hat.sigma0_sq},
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "boundary": self.boundary,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "provenance": provenance or {},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)


@dataclass(frozen=True)
class EffectPosterior:
    mean: float
    variance: float


def _check_uv(u, v):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(v < 0):
        raise ValueError("v must be nonnegative")
    return u, v


def individual_log_lambda(stats: SufficientStats, theta: ThetaParams) -> float:
    """log lambda_i in the cancellation-free form (finite at v = 0)."""
    u, v = stats.u, stats.v
    if v < 0:
        raise ValueError("v must be nonnegative")
    s = theta.sigma0_sq
    mu = theta.mu
    return float(-0.5 * np.log1p(s * v)
                 + (mu * u - 0.5 * mu ** 2 * v + 0.5 * s * u ** 2) / (1.0 + s * v))


def total_log_likelihood(batch: StatsBatch, theta: ThetaParams) -> float:
    """Sum of individual log lambda over the batch."""
    if len(batch) == 0:
        raise ValueError("empty stats batch")
    u, v = _check_uv(batch.u, batch.v)
    s = theta.sigma0_sq
    mu = theta.mu
    terms = (-0.5 * np.log1p(s * v)
             + (mu * u - 0.5 * mu ** 2 * v + 0.5 * s * u ** 2) / (1.0 + s * v))
    return float(np.sum(terms))


def score(batch: StatsBatch, theta: ThetaParams) -> tuple[float, float]:
    """(d/dmu, d/dsigma0_sq) of the log-likelihood.

    gamma_i = (u_i - mu v_i)/(1 + s v_i) and I_i = v_i/(1 + s v_i); the
    components are sum(gamma) and sum(gamma^2 - I)/2.
    """
    u, v = _check_uv(batch.u, batch.v)
    s = theta.sigma0_sq
    denom = 1.0 + s * v
    gamma = (u - theta.mu * v) / denom
    info = v / denom
    return float(np.sum(gamma)), float(0.5 * np.sum(gamma ** 2 - info))


def estimate_mu_fixed_sigma(batch: StatsBatch, sigma0_sq: float) -> float:
    """Explicit mu maximizer for a given sigma0_sq."""
    if sigma0_sq < 0:
        raise ValueError("sigma0_sq must be >= 0")
    u, v = _check_uv(batch.u, batch.v)
    denom = 1.0 + sigma0_sq * v
    den = np.sum(v / denom)
    if den == 0:
        raise ValueError("degenerate data: all v are zero")
    return float(np.sum(u / denom) / den)


def estimate_fixed_effect(batch: StatsBatch) -> float:
    """mu for the degenerate model sigma0_sq = 0: sum(u)/sum(v)."""
    return estimate_mu_fixed_sigma(batch, 0.0)


def estimate_constant_drift_moments(batch: StatsBatch) -> ThetaParams:
    """Closed-form moment estimator for constant b = c sigma.

    mu = mean(u)/mean(v) and sigma0_sq = (var(u) - mean(v)) / mean(v)^2,
    clipped at 0. Only meaningful when v is deterministic (constant drift
    and diffusion), where u_i are i.i.d. across trajectories.
    """
    u, v = _check_uv(batch.u, batch.v)
    vbar = float(np.mean(v))
    ubar = float(np.mean(u))
    if vbar == 0:
        raise ValueError("degenerate data: all v are zero")
    s = (np.mean((u - ubar) ** 2) - vbar) / vbar ** 2
    return ThetaParams(mu=ubar / vbar, sigma0_sq=max(0.0, float(s)))


def estimate_joint(batch: StatsBatch,
                   score_tol: float | None = None,
                   param_tol: float = PARAM_TOL,
                   max_iter: int = MAX_ITER) -> EffectEstimate:
    """Joint MLE of (mu, sigma0_sq) by profiled scalar root-finding."""
    u, v = _check_uv(batch.u, batch.v)
    N = len(u)
    if N < 2:
        raise ValueError("joint estimation needs at least 2 trajectories")
    if np.sum(v) == 0:
        raise ValueError("degenerate data: all v are zero")
    if score_tol is None:
        score_tol = SCORE_TOL_PER_TRAJECTORY * N

    def sigma_score(s):
        mu = estimate_mu_fixed_sigma(batch, s)
        denom = 1.0 + s * v
        gamma = (u - mu * v) / denom
        return 0.5 * np.sum(gamma ** 2 - v / denom)

    iterations = 0
    s0 = sigma_score(0.0)
    lo = 0.0
    if s0 <= 0:
        # The profiled score is not monotone: a single trajectory with
        # overwhelming v can push the score negative at 0 while the
        # likelihood still has an interior maximum further out. Scan a
        # geometric grid for a positive score before declaring a boundary.
        rises = [s for s in np.geomspace(1e-10, 1e14, 97) if sigma_score(s) > 0]
        iterations += 97
        if not rises:
            mu_hat = estimate_mu_fixed_sigma(batch, 0.0)
            theta = ThetaParams(mu=mu_hat, sigma0_sq=0.0)
            d_mu, _ = score(batch, theta)
            return EffectEstimate(theta_hat=theta,
                                  log_likelihood=total_log_likelihood(batch, theta),
                                  iterations=iterations, boundary=True,
                                  converged=True, gradient_norm=abs(d_mu))
        lo, s0 = rises[-1], sigma_score(rises[-1])
        dipped = True
    else:
        dipped = False

    # bracket a sign change by geometric expansion
    f_lo = s0
    hi = max(1.0, 4.0 * lo)
    f_hi = sigma_score(hi)
    while f_hi > 0:
        iterations += 1
        lo, f_lo = hi, f_hi
        hi *= 4.0
        if hi > 1e15 or iterations > max_iter:
            theta = ThetaParams(mu=estimate_mu_fixed_sigma(batch, hi),
                                sigma0_sq=hi)
            d_mu, d_s = score(batch, theta)
            return EffectEstimate(theta_hat=theta,
                                  log_likelihood=total_log_likelihood(batch, theta),
                                  iterations=iterations, boundary=False,
                                  converged=False,
                                  gradient_norm=float(np.hypot(d_mu, d_s)))
        f_hi = sigma_score(hi)

    root, info = scipy.optimize.brentq(sigma_score, lo, hi, xtol=param_tol,
                                       rtol=4 * np.finfo(float).eps,
                                       maxiter=max_iter, full_output=True)
    iterations += info.iterations
    theta = ThetaParams(mu=estimate_mu_fixed_sigma(batch, root), sigma0_sq=root)
    if dipped:
        # the score was negative at 0, so s = 0 is a competing local maximum
        theta0 = ThetaParams(mu=estimate_mu_fixed_sigma(batch, 0.0), sigma0_sq=0.0)
        if total_log_likelihood(batch, theta0) > total_log_likelihood(batch, theta):
            d_mu, _ = score(batch, theta0)
            return EffectEstimate(theta_hat=theta0,
                                  log_likelihood=total_log_likelihood(batch, theta0),
                                  iterations=iterations, boundary=True,
                                  converged=True, gradient_norm=abs(d_mu))
    d_mu, d_s = score(batch, theta)
    grad = float(np.hypot(d_mu, d_s))
    return EffectEstimate(theta_hat=theta,
                          log_likelihood=total_log_likelihood(batch, theta),
                          iterations=iterations, boundary=False,
                          converged=bool(info.converged
                                         and abs(d_mu) < score_tol
                                         and abs(d_s) < score_tol),
                          gradient_norm=grad)


def effect_posterior(stats: SufficientStats, theta: ThetaParams) -> EffectPosterior:
    """Conditional law of the effect given the path: Gaussian with

    mean (mu + s u)/(1 + s v), variance s/(1 + s v).
    """
    if theta.sigma0_sq == 0:
        raise DegeneratePosteriorError(theta.mu)
    if stats.v < 0:
        raise ValueError("v must be nonnegative")
    s = theta.sigma0_sq
    denom = 1.0 + s * stats.v
    return EffectPosterior(mean=(theta.mu + s * stats.u) / denom,
                           variance=s / denom)


def girsanov_log_density(q_values: np.ndarray, martingale_increments: np.ndarray,
                         omega_increments: np.ndarray) -> float:
    """Discrete log of the change-of-measure density:

    log Lambda(T) = -sum_k Q(t_k) dM_k - 1/2 sum_k Q(t_k)^2 domega_k,

    with left-point Q against the n increments of M and omega.
    """
    q = np.asarray(q_values, dtype=float)
    dm = np.asarray(martingale_increments, dtype=float)
    dw = np.asarray(omega_increments, dtype=float)
    if not (len(dm) == len(dw) == len(q) - 1):
        raise ValueError(
            f"misaligned series: need len(q) - 1 == len(dM) == len(domega), "
            f"got {len(q)}, {len(dm)}, {len(dw)}")
    ql = q[:-1]
    return float(-np.dot(ql, dm) - 0.5 * np.dot(ql ** 2, dw))
