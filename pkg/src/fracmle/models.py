"""Drift shapes b(x) and deterministic diffusion specifications sigma(t).

The drift here is the known function multiplying the scalar random effect:
the simulated model is dX = phi * b(X) dt + sigma(t) dW^H. All drifts must
obey a linear growth bound |b(x)| <= K (1 + |x|).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import TimeGrid


@dataclass(frozen=True)
class DriftModel:
    kind: str  # "constant" | "affine" | "callable"
    b0: float = 0.0
    a0: float = 0.0
    a1: float = 0.0
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    growth_bound: float = 1.0

    @classmethod
    def constant(cls, b0: float) -> "DriftModel":
        """b(x) = b0."""
        return cls(kind="constant", b0=float(b0), growth_bound=abs(float(b0)))

    @classmethod
    def affine(cls, a0: float, a1: float) -> "DriftModel":
        """b(x) = a0 + a1 * x."""
        a0, a1 = float(a0), float(a1)
        return cls(kind="affine", a0=a0, a1=a1, growth_bound=max(abs(a0), abs(a1)))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray],
                      growth_bound: float) -> "DriftModel":
        """Arbitrary vectorized b(x) with a declared linear growth constant K."""
        if growth_bound <= 0:
            raise ValueError("growth_bound must be positive")
        return cls(kind="callable", fn=fn, growth_bound=float(growth_bound))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.b0)
        if self.kind == "affine":
            return self.a0 + self.a1 * x
        out = np.asarray(self.fn(x), dtype=float)
        # spot-check the declared growth bound on actual evaluations
        bound = self.growth_bound * (1.0 + np.abs(x))
        if np.any(np.abs(out[np.isfinite(out)]) > bound[np.isfinite(out)] * (1 + 1e-12)):
            raise ValueError("drift callable violates its declared linear growth bound")
        return out

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def describe(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "b0": self.b0}
        if self.kind == "affine":
            return {"kind": "affine", "a0": self.a0, "a1": self.a1}
        return {"kind": "callable", "growth_bound": self.growth_bound}

    @classmethod
    def from_descriptor(cls, d: dict) -> "DriftModel":
        if d["kind"] == "constant":
            return cls.constant(d["b0"])
        if d["kind"] == "affine":
            return cls.affine(d["a0"], d["a1"])
        raise ValueError(f"cannot rebuild drift of kind {d['kind']!r} from a descriptor")


@dataclass(frozen=True)
class DiffusionSpec:
    """Positive deterministic diffusion coefficient, constant or tabulated."""

    kind: str  # "constant" | "tabulated"
    value: float = 1.0
    table: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def constant(cls, value: float) -> "DiffusionSpec":
        value = float(value)
        if value <= 0:
            raise ValueError(f"diffusion must be strictly positive, got {value}")
        return cls(kind="constant", value=value)

    @classmethod
    def tabulated(cls, table: np.ndarray) -> "DiffusionSpec":
        table = np.asarray(table, dtype=float)
        if table.ndim != 1 or np.any(table <= 0) or not np.all(np.isfinite(table)):
            raise ValueError("tabulated diffusion must be 1-D, finite and strictly positive")
        return cls(kind="tabulated", table=table)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def at_grid(self, grid: TimeGrid) -> np.ndarray:
        """sigma(t_k) for k = 0..n."""
        if self.kind == "constant":
            return np.full(grid.steps + 1, self.value)
        if self.table.shape[0] != grid.steps + 1:
            raise ValueError(
                f"tabulated diffusion has {self.table.shape[0]} entries, "
                f"grid needs {grid.steps + 1}"
            )
        return self.table

    def describe(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "tabulated", "length": int(self.table.shape[0])}
