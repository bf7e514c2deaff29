"""End-to-end experiment harness: simulate -> reduce -> estimate, replicated.

A run is fully determined by (config, master_seed): replication r derives
its effect seed as derive_seed(master, r, 0) and its fBm master seed as
derive_seed(master, r, 1), so results are independent of worker scheduling.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, ExperimentError
from .grid import TimeGrid, validate_hurst
from .kernel import KernelTable
from .mle import EffectEstimate, ThetaParams, estimate_joint
from .models import DiffusionSpec, DriftModel
from .sde import DEFAULT_BLOWUP_GUARD, derive_seed, draw_effects, simulate_batch
from .stats import StatsBatch, batch_sufficient_stats, convergence_probe, subsample

# a replication is kept only if at least this share of its trajectories survive
MIN_SURVIVAL = 0.9


@dataclass(frozen=True)
class ExperimentConfig:
    hurst: float = 0.7
    drift: DriftModel = field(default_factory=lambda: DriftModel.constant(1.0))
    sigma: DiffusionSpec = field(default_factory=lambda: DiffusionSpec.constant(1.0))
    x0: float = 1.0
    horizon: float = 5.0
    dt: float = 0.01
    n_paths: int = 50
    true_theta: ThetaParams = field(default_factory=lambda: ThetaParams(1.0, 1.0))
    replications: int = 20
    master_seed: int = 0
    threads: int = 1
    blowup_guard: float = DEFAULT_BLOWUP_GUARD

    def __post_init__(self):
        validate_hurst(self.hurst)
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n_paths < 2:
            raise ConfigError("n_paths must be >= 2 for joint estimation")
        TimeGrid.from_step(self.horizon, self.dt)  # validates divisibility

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_step(self.horizon, self.dt)

    def describe(self) -> dict:
        return {
            "hurst": self.hurst,
            "drift": self.drift.describe(),
            "sigma": self.sigma.describe(),
            "x0": self.x0,
            "horizon": self.horizon,
            "dt": self.dt,
            "n_paths": self.n_paths,
            "true_theta": {"mu": self.true_theta.mu,
                           "sigma0_sq": self.true_theta.sigma0_sq},
            "replications": self.replications,
            "master_seed": self.master_seed,
            "threads": self.threads,
            "blowup_guard": self.blowup_guard,
        }


@dataclass(frozen=True)
class ReplicationResult:
    index: int
    estimate: EffectEstimate | None
    excluded: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.estimate is not None


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    replications: list[ReplicationResult]
    wall_clock: float
    version: str = __version__

    @property
    def mu_hats(self) -> np.ndarray:
        return np.array([r.estimate.theta_hat.mu
                         for r in self.replications if r.ok])

    @property
    def sigma0_sq_hats(self) -> np.ndarray:
        return np.array([r.estimate.theta_hat.sigma0_sq
                         for r in self.replications if r.ok])

    def summary(self) -> dict:
        out = {}
        for name, vals in (("mu", self.mu_hats), ("sigma0_sq", self.sigma0_sq_hats)):
            out[name] = {
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                "stderr": (float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
                           if len(vals) > 1 else 0.0),
            }
        out["failed_replications"] = sum(not r.ok for r in self.replications)
        return out

    def to_json(self, path) -> None:
        payload = {
            "config": self.config,
            "version": self.version,
            "wall_clock": self.wall_clock,
            "summary": self.summary(),
            "replications": [
                {"index": r.index,
                 "mu_hat": r.estimate.theta_hat.mu if r.ok else None,
                 "sigma0_sq_hat": r.estimate.theta_hat.sigma0_sq if r.ok else None,
                 "log_likelihood": r.estimate.log_likelihood if r.ok else None,
                 "converged": r.estimate.converged if r.ok else None,
                 "boundary": r.estimate.boundary if r.ok else None,
                 "excluded_trajectories": r.excluded,
                 "error": r.error}
                for r in self.replications],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)

    def to_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replication", "mu_hat", "sigma0_sq_hat",
                             "log_likelihood", "converged", "boundary",
                             "excluded", "error"])
            for r in self.replications:
                if r.ok:
                    writer.writerow([r.index, repr(r.estimate.theta_hat.mu),
                                     repr(r.estimate.theta_hat.sigma0_sq),
                                     repr(r.estimate.log_likelihood),
                                     r.estimate.converged, r.estimate.boundary,
                                     r.excluded, ""])
                else:
                    writer.writerow([r.index, "", "", "", "", "", r.excluded,
                                     r.error])


def run_replication(config: ExperimentConfig, index: int,
                    table: KernelTable) -> ReplicationResult:
    try:
        effects = draw_effects(config.n_paths, config.true_theta.mu,
                               config.true_theta.sigma0_sq,
                               derive_seed(config.master_seed, index, 0))
        batch = simulate_batch(effects, config.drift, config.sigma,
                               config.grid, config.x0,
                               derive_seed(config.master_seed, index, 1),
                               config.hurst, blowup_guard=config.blowup_guard,
                               on_blowup="exclude")
        excluded = len(batch.failed)
        if len(batch.survivors) < MIN_SURVIVAL * len(batch):
            return ReplicationResult(index=index, estimate=None, excluded=excluded,
                                     error=f"only {len(batch.survivors)} of "
                                           f"{len(batch)} trajectories survived")
        stats = batch_sufficient_stats(batch, table=table)
        est = estimate_joint(stats)
        return ReplicationResult(index=index, estimate=est, excluded=excluded)
    except Exception as exc:  # noqa: BLE001 - isolate per-replication failures
        return ReplicationResult(index=index, estimate=None, excluded=0,
                                 error=f"{type(exc).__name__}: {exc}")


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Replicated simulate/reduce/estimate pipeline; deterministic per config."""
    start = time.perf_counter()
    table = KernelTable(config.grid, config.hurst)
    indices = range(config.replications)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda r: run_replication(config, r, table),
                                    indices))
    else:
        results = [run_replication(config, r, table) for r in indices]
    n_failed = sum(not r.ok for r in results)
    if n_failed * 2 >= config.replications and n_failed > 0:
        causes = {r.index: r.error for r in results if not r.ok}
        raise ExperimentError(f"{n_failed}/{config.replications} replications "
                              f"failed: {causes}")
    return ExperimentReport(config=config.describe(), replications=results,
                            wall_clock=time.perf_counter() - start)


@dataclass(frozen=True)
class ConvergenceStudyReport:
    config: dict
    levels: list[int]
    u_diffs: np.ndarray   # (paths, levels-1)
    v_diffs: np.ndarray
    u_slopes: np.ndarray  # per path
    v_slopes: np.ndarray

    def median_slopes(self) -> tuple[float, float]:
        return float(np.median(self.u_slopes)), float(np.median(self.v_slopes))

    def to_json(self, path) -> None:
        mu, mv = self.median_slopes()
        payload = {
            "config": self.config,
            "levels": self.levels,
            "median_u_slope": mu,
            "median_v_slope": mv,
            "u_slopes": self.u_slopes.tolist(),
            "v_slopes": self.v_slopes.tolist(),
            "u_diffs": self.u_diffs.tolist(),
            "v_diffs": self.v_diffs.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)

    def to_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "level_steps", "u_diff", "v_diff"])
            for p in range(self.u_diffs.shape[0]):
                for j, m in enumerate(self.levels[:-1]):
                    writer.writerow([p, m, repr(float(self.u_diffs[p, j])),
                                     repr(float(self.v_diffs[p, j]))])


def run_convergence_study(config: ExperimentConfig,
                          levels: list[int]) -> ConvergenceStudyReport:
    """Discretization decay of (u, v) on nested observations of shared paths.

    Each trajectory is simulated once on the finest level and observed on
    every coarser nested grid; reports per-path |stat^(m) - stat^(2m)| and
    fitted log-log slopes.
    """
    levels = sorted(int(m) for m in levels)
    if len(levels) < 3:
        raise ConfigError("convergence study needs at least 3 levels")
    if any(b != 2 * a for a, b in zip(levels[:-1], levels[1:])):
        raise ConfigError("levels must double: m, 2m, 4m, ...")
    finest = TimeGrid(config.horizon, levels[-1])
    effects = draw_effects(config.n_paths, config.true_theta.mu,
                           config.true_theta.sigma0_sq,
                           derive_seed(config.master_seed, 0, 0))
    batch = simulate_batch(effects, config.drift, config.sigma, finest,
                           config.x0, derive_seed(config.master_seed, 0, 1),
                           config.hurst, blowup_guard=config.blowup_guard)
    u_diffs, v_diffs, u_slopes, v_slopes = [], [], [], []
    for i in range(config.n_paths):
        fine = batch.trajectory(i)
        trajs = [subsample(fine, levels[-1] // m) for m in levels]
        rep = convergence_probe(trajs, config.drift, config.sigma, config.hurst)
        u_diffs.append(rep.u_diffs)
        v_diffs.append(rep.v_diffs)
        u_slopes.append(rep.u_slope)
        v_slopes.append(rep.v_slope)
    return ConvergenceStudyReport(config=config.describe(), levels=levels,
                                  u_diffs=np.array(u_diffs),
                                  v_diffs=np.array(v_diffs),
                                  u_slopes=np.array(u_slopes),
                                  v_slopes=np.array(v_slopes))
