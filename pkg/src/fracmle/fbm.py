"""Exact fractional Brownian motion sampling on uniform grids.

The stationary increment process (fractional Gaussian noise) is sampled
exactly via circulant embedding of its covariance (Davies-Harte); when the
embedding is not nonnegative definite for the requested (H, n) a dense
Cholesky factorization of the increment covariance is used instead. Levels
are recovered by prefix sum, so values[0] = 0 always.

Per-path randomness: path ``i`` of a batch draws from
``numpy.random.default_rng(SeedSequence(entropy=master_seed, spawn_key=(i,)))``.
This splitting rule makes batches reproducible independently of scheduling
order, and any single path can be regenerated in isolation.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ResourceError
from .grid import TimeGrid, validate_hurst

# Cholesky fallback refuses grids whose dense increment covariance would
# not fit comfortably in memory.
_MAX_CHOLESKY_STEPS = 16384

_BATCH_MAGIC = b"FBMB\x01"


def fbm_covariance(s: float, t: float, H: float) -> float:
    """Covariance E[W_s^H W_t^H] = (t^2H + s^2H - |t-s|^2H) / 2."""
    H = validate_hurst(H, allow_brownian=True)
    if s < 0 or t < 0:
        raise ValueError(f"times must be nonnegative, got s={s}, t={t}")
    h2 = 2.0 * H
    return 0.5 * (t ** h2 + s ** h2 - abs(t - s) ** h2)


def path_stream(master_seed: int, index: int) -> np.random.Generator:
    """The documented per-path RNG splitting rule."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.default_rng(ss)


def _fgn_autocovariance(n: int, H: float, dt: float) -> np.ndarray:
    """gamma(k) for lags k = 0..n of fGn with spacing dt."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * H
    gamma = 0.5 * (np.abs(k + 1) ** h2 + np.abs(k - 1) ** h2 - 2.0 * k ** h2)
    return gamma * dt ** h2


@dataclass(frozen=True)
class FbmPath:
    hurst: float
    grid: TimeGrid
    values: np.ndarray  # length n+1, values[0] == 0
    seed: int  # (master_seed, index) collapsed: the master seed of the batch

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "value"])
            for t, v in zip(self.grid.points, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])


class FbmGenerator:
    """Shared, read-only factorization for sampling fGn on one (grid, H).

    Safe to use concurrently from multiple workers as long as each worker
    owns its own ``numpy.random.Generator``.
    """

    def __init__(self, grid: TimeGrid, H: float):
        self.grid = grid
        self.H = validate_hurst(H, allow_brownian=True)
        n = grid.steps
        gamma = _fgn_autocovariance(n, self.H, grid.dt)

        # circulant embedding of the Toeplitz covariance
        circ = np.concatenate([gamma[:n], gamma[n:n + 1], gamma[n - 1:0:-1]])
        lam = np.fft.fft(circ).real
        tol = 1e-10 * max(1.0, lam.max())
        if lam.min() > -tol:
            self.method = "circulant"
            self._lam = np.clip(lam, 0.0, None)
            self._chol = None
        else:
            if n > _MAX_CHOLESKY_STEPS:
                raise ResourceError(
                    f"circulant embedding is not nonnegative definite for "
                    f"(H={self.H}, n={n}) and the Cholesky fallback is limited to "
                    f"n <= {_MAX_CHOLESKY_STEPS} steps; reduce the grid size or "
                    f"increase dt"
                )
            self.method = "cholesky"
            self._lam = None
            cov = scipy.linalg.toeplitz(gamma[:n])
            self._chol = scipy.linalg.cholesky(cov, lower=True)

    def sample_increments(self, rng: np.random.Generator) -> np.ndarray:
        """One draw of the n fGn increments."""
        n = self.grid.steps
        if self.method == "cholesky":
            return self._chol @ rng.standard_normal(n)
        m = 2 * n
        z = rng.standard_normal(2 * n)
        w = np.zeros(m, dtype=complex)
        w[0] = np.sqrt(self._lam[0] / m) * z[0]
        w[n] = np.sqrt(self._lam[n] / m) * z[1]
        if n > 1:
            a = z[2:n + 1]
            b = z[n + 1:2 * n]
            half = np.sqrt(self._lam[1:n] / (2 * m)) * (a + 1j * b)
            w[1:n] = half
            w[m - 1:n:-1] = np.conj(half)
        return np.fft.fft(w).real[:n]

    def sample_path(self, rng: np.random.Generator) -> np.ndarray:
        """One fBm path at the grid points (length n+1, starts at 0)."""
        out = np.empty(self.grid.steps + 1)
        out[0] = 0.0
        np.cumsum(self.sample_increments(rng), out=out[1:])
        return out


def generate_fbm_increments(grid: TimeGrid, H: float, count: int,
                            master_seed: int) -> np.ndarray:
    """(count, n) array of independent fGn draws, one RNG stream per row."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    gen = FbmGenerator(grid, H)
    out = np.empty((count, grid.steps))
    for i in range(count):
        out[i] = gen.sample_increments(path_stream(master_seed, i))
    return out


def generate_fbm_paths(grid: TimeGrid, H: float, count: int,
                       master_seed: int) -> list[FbmPath]:
    """Independent exact fBm paths; path i is a pure function of (master_seed, i)."""
    incs = generate_fbm_increments(grid, H, count, master_seed)
    values = np.concatenate([np.zeros((count, 1)), np.cumsum(incs, axis=1)], axis=1)
    return [FbmPath(hurst=float(H), grid=grid, values=values[i], seed=int(master_seed))
            for i in range(count)]


def save_fbm_batch(path, paths: list[FbmPath]) -> None:
    """Binary batch format: magic, header (H, T, n, N, master_seed), row-major doubles."""
    if not paths:
        raise ValueError("cannot save an empty batch")
    grid = paths[0].grid
    header = struct.pack("<ddqqq", paths[0].hurst, grid.horizon,
                         grid.steps, len(paths), paths[0].seed)
    values = np.stack([p.values for p in paths]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_BATCH_MAGIC)
        fh.write(header)
        fh.write(values.tobytes())


def load_fbm_batch(path) -> list[FbmPath]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_BATCH_MAGIC))
        if magic != _BATCH_MAGIC:
            raise ValueError(f"{path}: not an fBm batch file")
        H, T, n, N, seed = struct.unpack("<ddqqq", fh.read(40))
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(N, n + 1)
    grid = TimeGrid(T, int(n))
    return [FbmPath(hurst=H, grid=grid, values=values[i].copy(), seed=int(seed))
            for i in range(int(N))]
