"""Uniform time grids and Hurst-index validation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def validate_hurst(H: float, allow_brownian: bool = False) -> float:
    """Check that H lies in the supported range and return it as a float.

    The estimation pipeline requires 1/2 < H < 1. Generators and kernel
    operations additionally accept H = 1/2 (``allow_brownian=True``) so the
    classical Brownian degeneration can be exercised.
    """
    H = float(H)
    lo_ok = H > 0.5 or (allow_brownian and H == 0.5)
    if not (lo_ok and H < 1.0):
        rng = "[1/2, 1)" if allow_brownian else "(1/2, 1)"
        raise ValueError(f"Hurst index must lie in {rng}, got {H}")
    return H


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into ``steps`` intervals.

    Grid points are t_k = k*T/n for k = 0..n; every series in the package is
    indexed on these n+1 points.
    """

    horizon: float
    steps: int

    def __post_init__(self):
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if not (isinstance(self.steps, (int, np.integer)) and self.steps >= 1):
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def points(self) -> np.ndarray:
        """Grid points t_0..t_n, length steps+1."""
        return np.arange(self.steps + 1) * (self.horizon / self.steps)

    @classmethod
    def from_step(cls, horizon: float, dt: float) -> "TimeGrid":
        """Build a grid from (T, dt); dt must divide T to within rounding."""
        n = int(round(horizon / dt))
        if n < 1 or abs(n * dt - horizon) > 4 * np.finfo(float).eps * max(1.0, horizon):
            raise ValueError(f"dt={dt} does not divide horizon={horizon} into whole steps")
        return cls(horizon, n)

    def refine(self, factor: int) -> "TimeGrid":
        """The nested grid with ``factor`` times as many steps."""
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        return TimeGrid(self.horizon, self.steps * factor)
