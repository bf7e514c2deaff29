"""Norros kernel machinery for fractional Brownian motion.

Implements the weighting kernel k_H(t,s), its normalizing constants, the
deterministic weight process omega_t, and the discrete kernel transforms
that turn an observed path into the fundamental semimartingale Z and the
signal process Q_H. Discrete sums run over interior indices i = 2..k-1
only, which sidesteps the kernel's integrable singularities at s = 0 and
s = t; sums with no terms are 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import gamma as _gamma

import numpy as np

from .errors import DataError, ResourceError
from .grid import TimeGrid, validate_hurst
from .models import DiffusionSpec, DriftModel

# Dense (n+1)^2 kernel weight tables above this size are refused; the
# finest practical setting (T=8, dt=0.001) needs ~0.5 GB and still fits.
_MAX_TABLE_BYTES = 1 << 30


@dataclass(frozen=True)
class NorrosConstants:
    hurst: float
    kappa: float
    lam: float


@dataclass(frozen=True)
class WeightedSeries:
    """A series on a grid together with the weights omega(t_k)."""

    grid: TimeGrid
    values: np.ndarray
    weights: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "value", "omega"])
            for t, v, w in zip(self.grid.points, self.values, self.weights):
                writer.writerow([repr(float(t)), repr(float(v)), repr(float(w))])


def norros_constants(H: float) -> NorrosConstants:
    """kappa = 2H G(3/2-H) G(H+1/2) and lambda = 2H G(3-2H) G(H+1/2) / G(3/2-H)."""
    H = validate_hurst(H, allow_brownian=True)
    kappa = 2.0 * H * _gamma(1.5 - H) * _gamma(H + 0.5)
    lam = 2.0 * H * _gamma(3.0 - 2.0 * H) * _gamma(H + 0.5) / _gamma(1.5 - H)
    return NorrosConstants(hurst=H, kappa=kappa, lam=lam)


def kernel_kh(t: float, s: float, H: float) -> float:
    """k_H(t,s) = kappa^-1 s^(1/2-H) (t-s)^(1/2-H), defined for 0 < s < t."""
    c = norros_constants(H)
    if not (0.0 < s < t):
        raise ValueError(f"kernel requires 0 < s < t, got s={s}, t={t}")
    a = 0.5 - H
    return (s ** a) * ((t - s) ** a) / c.kappa


def weight_omega(t, H: float):
    """omega_t = lambda^-1 t^(2-2H); the quadratic variation of the martingale."""
    c = norros_constants(H)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = t ** (2.0 - 2.0 * H) / c.lam
    return float(out) if out.ndim == 0 else out


def kernel_integral(ratio: np.ndarray, grid: TimeGrid, k: int, H: float) -> float:
    """Left-point sum for int_0^{t_k} k_H(t_k,s) b(X(s))/sigma(s) ds.

    ``ratio`` holds b(X(t_i))/sigma(t_i) on the grid. The sum runs over
    i = 2..k-1, so k <= 2 gives 0.
    """
    if not 0 <= k <= grid.steps:
        raise ValueError(f"index k={k} outside grid 0..{grid.steps}")
    if k <= 2:
        return 0.0
    c = norros_constants(H)
    t = grid.points
    a = 0.5 - H
    i = np.arange(2, k)
    w = (t[i] ** a) * ((t[k] - t[i]) ** a) / c.kappa
    return float(np.dot(w, np.asarray(ratio, dtype=float)[i]) * grid.dt)


class KernelTable:
    """Precomputed kernel weights for one (grid, H), shared across trajectories.

    Row k holds kappa^-1 t_i^(1/2-H) (t_k - t_i)^(1/2-H) for i = 2..k-1 and
    zero elsewhere, so the kernel transforms become matrix products. The
    table is read-only after construction and safe to share between workers.
    """

    def __init__(self, grid: TimeGrid, H: float):
        self.grid = grid
        self.H = validate_hurst(H, allow_brownian=True)
        self.constants = norros_constants(self.H)
        n = grid.steps
        nbytes = (n + 1) ** 2 * 8
        if nbytes > _MAX_TABLE_BYTES:
            raise ResourceError(
                f"kernel table for n={n} needs {nbytes / 2**20:.0f} MiB "
                f"(limit {_MAX_TABLE_BYTES / 2**20:.0f} MiB); increase dt"
            )
        t = grid.points
        a = 0.5 - self.H
        diff = t[:, None] - t[None, :]
        idx = np.arange(n + 1)
        mask = (idx[None, :] >= 2) & (idx[None, :] <= idx[:, None] - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s_pow = np.where(idx >= 2, t, 1.0) ** a
            w = s_pow[None, :] * np.where(mask, diff, 1.0) ** a / self.constants.kappa
        self.weights_matrix = np.where(mask, w, 0.0)
        self.omega = weight_omega(t, self.H)
        self.domega = np.diff(self.omega)  # domega[k-1] = omega(t_k) - omega(t_{k-1})

    # -- transforms; columns of 2-D inputs are independent trajectories ------

    def integral_series(self, ratio: np.ndarray) -> np.ndarray:
        """Kernel integral at every t_k for ratio = b(X)/sigma on the grid."""
        return self.weights_matrix @ np.asarray(ratio, dtype=float) * self.grid.dt

    def z_from_increments(self, scaled_increments: np.ndarray) -> np.ndarray:
        """Z(t_k) = sum_{i=2}^{k-1} w[k,i] (X_{t_{i+1}} - X_{t_i}) / sigma(t_i).

        ``scaled_increments`` has length n (index i = 0..n-1); entry n-1 is
        never used because i stops at k-1 <= n-1 only when k = n.
        """
        g = np.asarray(scaled_increments, dtype=float)
        pad_shape = (1,) + g.shape[1:]
        padded = np.concatenate([g, np.zeros(pad_shape)], axis=0)
        return self.weights_matrix @ padded

    def q_from_integral(self, integral: np.ndarray) -> np.ndarray:
        """Q_H(t_k) = (I_k - I_{k-1}) / (omega_k - omega_{k-1}), Q_H(0) = 0."""
        integral = np.asarray(integral, dtype=float)
        q = np.zeros_like(integral)
        if integral.ndim == 1:
            q[1:] = np.diff(integral) / self.domega
        else:
            q[1:] = np.diff(integral, axis=0) / self.domega[:, None]
        return q


def _ratio_series(values: np.ndarray, drift: DriftModel, sigma_grid: np.ndarray,
                  label: str) -> np.ndarray:
    ratio = drift(values) / sigma_grid
    if not np.all(np.isfinite(ratio)):
        bad = int(np.flatnonzero(~np.isfinite(ratio))[0])
        raise DataError(f"{label}: non-finite drift/sigma ratio at grid index {bad}")
    return ratio


def compute_qh(values: np.ndarray, drift: DriftModel, sigma: DiffusionSpec,
               H: float, table: KernelTable | None = None,
               grid: TimeGrid | None = None, label: str = "trajectory") -> WeightedSeries:
    """The signal process Q_H(t_k) of one observed path."""
    if table is None:
        table = KernelTable(grid, H)
    sigma_grid = sigma.at_grid(table.grid)
    ratio = _ratio_series(np.asarray(values, dtype=float), drift, sigma_grid, label)
    q = table.q_from_integral(table.integral_series(ratio))
    return WeightedSeries(grid=table.grid, values=q, weights=table.omega)


def compute_z(values: np.ndarray, sigma: DiffusionSpec, H: float,
              table: KernelTable | None = None,
              grid: TimeGrid | None = None) -> WeightedSeries:
    """The fundamental semimartingale Z(t_k) of one observed path."""
    if table is None:
        table = KernelTable(grid, H)
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise DataError(f"non-finite path value at grid index {bad}")
    sigma_grid = sigma.at_grid(table.grid)
    g = np.diff(values) / sigma_grid[:-1]
    z = table.z_from_increments(g)
    return WeightedSeries(grid=table.grid, values=z, weights=table.omega)


def fundamental_martingale(path, table: KernelTable | None = None) -> WeightedSeries:
    """M^H(t_k): the kernel transform of an fBm path (sigma = 1)."""
    if table is None:
        table = KernelTable(path.grid, path.hurst)
    g = np.diff(np.asarray(path.values, dtype=float))
    m = table.z_from_increments(g)
    return WeightedSeries(grid=table.grid, values=m, weights=table.omega)
