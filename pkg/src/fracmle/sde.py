"""Simulation of the mixed-effects SDE dX = phi b(X) dt + sigma(t) dW^H.

Each trajectory i carries its own random effect phi_i ~ N(mu, sigma0_sq)
and its own independent fBm path; the drift is integrated by explicit Euler
with the left-endpoint drift (the noise term is additive, so it enters the
scheme exactly).

Seed topology: an experiment-level seed splits into an effects stream and a
per-trajectory fBm master stream (see :func:`derive_seed`), so any single
trajectory can be regenerated in isolation.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationError
from .fbm import generate_fbm_increments
from .grid import TimeGrid, validate_hurst
from .models import DiffusionSpec, DriftModel

DEFAULT_BLOWUP_GUARD = 1e12

_TRAJ_MAGIC = b"TRJB\x01"


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic 63-bit child seed from (master_seed, key...)."""
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class EffectPopulation:
    mu: float
    sigma0_sq: float
    draws: np.ndarray
    seed: int

    def __len__(self) -> int:
        return len(self.draws)


def draw_effects(N: int, mu: float, sigma0_sq: float, seed: int) -> EffectPopulation:
    """N i.i.d. N(mu, sigma0_sq) random effects; sigma0_sq = 0 degenerates to mu."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if sigma0_sq < 0:
        raise ValueError(f"sigma0_sq must be >= 0, got {sigma0_sq}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    draws = mu + np.sqrt(sigma0_sq) * rng.standard_normal(N)
    return EffectPopulation(mu=float(mu), sigma0_sq=float(sigma0_sq),
                            draws=draws, seed=int(seed))


@dataclass(frozen=True)
class Trajectory:
    """One observed path. ``effect_truth`` is diagnostics-only: estimation
    operations take plain value arrays and never see it."""

    grid: TimeGrid
    x0: float
    values: np.ndarray
    effect_truth: float | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "value"])
            for t, v in zip(self.grid.points, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])


@dataclass(frozen=True)
class TrajectoryBatch:
    grid: TimeGrid
    hurst: float
    drift: DriftModel
    sigma: DiffusionSpec
    x0: float
    values: np.ndarray          # (N, n+1)
    effects: EffectPopulation
    fbm_seed: int
    failed: dict = field(default_factory=dict)  # trajectory index -> blow-up step

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def survivors(self) -> np.ndarray:
        """Indices of trajectories that did not blow up."""
        return np.array([i for i in range(len(self)) if i not in self.failed],
                        dtype=int)

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(grid=self.grid, x0=self.x0, values=self.values[i],
                          effect_truth=float(self.effects.draws[i]))


def simulate_batch(effects: EffectPopulation, drift: DriftModel,
                   sigma: DiffusionSpec, grid: TimeGrid, x0: float,
                   fbm_seed: int, H: float,
                   blowup_guard: float = DEFAULT_BLOWUP_GUARD,
                   on_blowup: str = "raise") -> TrajectoryBatch:
    """Euler paths X(t_{k+1}) = X(t_k) + phi b(X(t_k)) dt + sigma(t_k) dW_k.

    ``on_blowup="raise"`` aborts on the first trajectory whose |X| exceeds
    the guard; ``"exclude"`` records it in ``batch.failed`` (its values are
    NaN from the offending step on) and keeps simulating the rest.
    """
    H = validate_hurst(H)
    if on_blowup not in ("raise", "exclude"):
        raise ValueError(f"on_blowup must be 'raise' or 'exclude', got {on_blowup!r}")
    N = len(effects)
    n = grid.steps
    dt = grid.dt
    phi = effects.draws
    sig = sigma.at_grid(grid)
    dw = generate_fbm_increments(grid, H, N, fbm_seed)

    values = np.empty((N, n + 1))
    values[:, 0] = x0
    alive = np.ones(N, dtype=bool)
    failed: dict[int, int] = {}
    x = np.full(N, float(x0))
    for k in range(n):
        x = x + phi * drift(x) * dt + sig[k] * dw[:, k]
        bad = alive & (~np.isfinite(x) | (np.abs(x) > blowup_guard))
        if bad.any():
            first = int(np.flatnonzero(bad)[0])
            if on_blowup == "raise":
                raise SimulationError(
                    f"trajectory {first} exceeded |X| guard {blowup_guard:g} "
                    f"at step {k + 1}", trajectory=first, step=k + 1)
            for i in np.flatnonzero(bad):
                failed[int(i)] = k + 1
            alive &= ~bad
            x = np.where(bad, np.nan, x)
        values[:, k + 1] = x
    return TrajectoryBatch(grid=grid, hurst=H, drift=drift, sigma=sigma,
                           x0=float(x0), values=values, effects=effects,
                           fbm_seed=int(fbm_seed), failed=failed)


def save_trajectory_batch(path, batch: TrajectoryBatch) -> None:
    """fBm batch format extended with drift/sigma descriptors, x0 and effects.

    Layout: magic, u32 header length, JSON header, effects as raw doubles,
    optional sigma table as raw doubles, values row-major. Doubles round-trip
    bit-exactly; scalar floats in the JSON header round-trip via repr.
    """
    header = {
        "hurst": batch.hurst,
        "horizon": batch.grid.horizon,
        "steps": batch.grid.steps,
        "count": len(batch),
        "fbm_seed": batch.fbm_seed,
        "x0": batch.x0,
        "drift": batch.drift.describe(),
        "sigma": batch.sigma.describe(),
        "effects": {"mu": batch.effects.mu, "sigma0_sq": batch.effects.sigma0_sq,
                    "seed": batch.effects.seed},
        "failed": {str(k): v for k, v in batch.failed.items()},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_TRAJ_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(batch.effects.draws.astype("<f8").tobytes())
        if batch.sigma.kind == "tabulated":
            fh.write(batch.sigma.table.astype("<f8").tobytes())
        fh.write(batch.values.astype("<f8").tobytes())


def load_trajectory_batch(path) -> TrajectoryBatch:
    with open(path, "rb") as fh:
        if fh.read(len(_TRAJ_MAGIC)) != _TRAJ_MAGIC:
            raise ValueError(f"{path}: not a trajectory batch file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        N = header["count"]
        n = header["steps"]
        draws = np.frombuffer(fh.read(8 * N), dtype="<f8").copy()
        if header["sigma"]["kind"] == "tabulated":
            table = np.frombuffer(fh.read(8 * (n + 1)), dtype="<f8").copy()
            sigma = DiffusionSpec.tabulated(table)
        else:
            sigma = DiffusionSpec.constant(header["sigma"]["value"])
        values = np.frombuffer(fh.read(), dtype="<f8").copy().reshape(N, n + 1)
    eff = header["effects"]
    effects = EffectPopulation(mu=eff["mu"], sigma0_sq=eff["sigma0_sq"],
                               draws=draws, seed=eff["seed"])
    return TrajectoryBatch(
        grid=TimeGrid(header["horizon"], n), hurst=header["hurst"],
        drift=DriftModel.from_descriptor(header["drift"]), sigma=sigma,
        x0=header["x0"], values=values, effects=effects,
        fbm_seed=header["fbm_seed"],
        failed={int(k): v for k, v in header["failed"].items()})
