"""Simulation and exact maximum-likelihood estimation for SDEs with a
Gaussian random drift effect driven by fractional Brownian motion."""

__version__ = "0.1.0"

from .grid import TimeGrid, validate_hurst
from .models import DiffusionSpec, DriftModel
from .fbm import FbmGenerator, FbmPath, fbm_covariance, generate_fbm_paths
from .kernel import (KernelTable, NorrosConstants, WeightedSeries, compute_qh,
                     compute_z, fundamental_martingale, kernel_integral,
                     kernel_kh, norros_constants, weight_omega)
from .sde import (EffectPopulation, Trajectory, TrajectoryBatch, derive_seed,
                  draw_effects, simulate_batch)
from .stats import (StatsBatch, SufficientStats, batch_sufficient_stats,
                    convergence_probe, subsample, sufficient_stats)
from .mle import (EffectEstimate, EffectPosterior, ThetaParams,
                  effect_posterior, estimate_constant_drift_moments,
                  estimate_fixed_effect, estimate_joint,
                  estimate_mu_fixed_sigma, girsanov_log_density,
                  individual_log_lambda, score, total_log_likelihood)
from .experiments import (ExperimentConfig, ExperimentReport, run_convergence_study,
                          run_experiment)

__all__ = [
    "TimeGrid", "validate_hurst", "DiffusionSpec", "DriftModel",
    "FbmGenerator", "FbmPath", "fbm_covariance", "generate_fbm_paths",
    "KernelTable", "NorrosConstants", "WeightedSeries", "compute_qh",
    "compute_z", "fundamental_martingale", "kernel_integral", "kernel_kh",
    "norros_constants", "weight_omega",
    "EffectPopulation", "Trajectory", "TrajectoryBatch", "derive_seed",
    "draw_effects", "simulate_batch",
    "StatsBatch", "SufficientStats", "batch_sufficient_stats",
    "convergence_probe", "subsample", "sufficient_stats",
    "EffectEstimate", "EffectPosterior", "ThetaParams", "effect_posterior",
    "estimate_constant_drift_moments", "estimate_fixed_effect",
    "estimate_joint", "estimate_mu_fixed_sigma", "girsanov_log_density",
    "individual_log_lambda", "score", "total_log_likelihood",
    "ExperimentConfig", "ExperimentReport", "run_convergence_study",
    "run_experiment",
]
