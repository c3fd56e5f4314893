"""Upper bound on the fractal dimension from the squeezing data (N, L, theta)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class DimensionBoundInputs:
    n_rank: int
    lipschitz: float
    theta: float

    def __post_init__(self):
        if not (isinstance(self.n_rank, (int, np.integer)) and self.n_rank >= 1):
            raise ValidationError(f"n_rank must be an integer >= 1, got {self.n_rank!r}")
        if not (math.isfinite(self.lipschitz) and self.lipschitz > 0):
            raise ValidationError(f"lipschitz must be > 0, got {self.lipschitz}")
        if not 0 < self.theta < 1:
            raise ValidationError(f"theta must lie in (0, 1), got {self.theta}")


def dimension_bound(inputs: DimensionBoundInputs) -> float:
    """N max{1, log(2 sqrt(2) L / theta + 1) / (-log theta)}."""
    N, L, th = inputs.n_rank, inputs.lipschitz, inputs.theta
    ratio = math.log1p(2 * math.sqrt(2) * L / th) / -math.log(th)
    return N * max(1.0, ratio)


def theta_grid(n: int = 99, lo: float = 0.01, hi: float = 0.99) -> np.ndarray:
    return np.linspace(lo, hi, n)


def theta_scan(n_rank: int, lipschitz: float, thetas=None) -> dict:
    """Bound over a theta grid with its minimiser."""
    thetas = theta_grid() if thetas is None else np.asarray(thetas, dtype=float)
    bounds = np.array([dimension_bound(DimensionBoundInputs(n_rank, lipschitz, float(t))) for t in thetas])
    k = int(np.argmin(bounds))
    return {"thetas": thetas, "bounds": bounds, "theta_min": float(thetas[k]), "bound_min": float(bounds[k])}
