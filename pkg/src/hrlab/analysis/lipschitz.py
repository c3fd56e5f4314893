"""Sampled Lipschitz bounds of the semiflow in the initial datum and in time."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..integrator import StepperConfig, evolve_batch, pair_observer
from ..model import HRParameters, coupled_constant, monotone_constant, time_lipschitz_constant
from ..spectral import SpectralBasis, state_norms

SLACK = 1e-6


def _grid_indices(times, t_grid):
    idx = []
    for t in t_grid:
        j = int(np.argmin(np.abs(times - t)))
        if abs(times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"t_grid value {t} is not a recorded time; align it with dt * record_every")
        idx.append(j)
    return np.array(idx)


@dataclass
class LipschitzReport:
    t_grid: np.ndarray
    max_ratio: np.ndarray
    ceiling_c_star: np.ndarray
    ceiling_coupled: np.ndarray
    n_pairs: int
    per_pair_max: np.ndarray = field(repr=False)

    @property
    def bound(self) -> np.ndarray:
        return np.minimum(self.ceiling_c_star, self.ceiling_coupled)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.max_ratio <= self.bound * (1 + SLACK)))

    @property
    def gronwall_ok(self) -> bool:
        return bool(np.all(self.max_ratio <= self.ceiling_c_star * (1 + SLACK)))

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "rows": [
                {"t": t, "max_ratio": r, "ceiling_c_star": a, "ceiling_coupled": b, "bound": min(a, b)}
                for t, r, a, b in zip(self.t_grid, self.max_ratio, self.ceiling_c_star, self.ceiling_coupled)
            ],
            "gronwall_ok": self.gronwall_ok,
            "ok": self.ok,
        }


def lipschitz_probe(basis: SpectralBasis, g0, h0, params: HRParameters, t_grid,
                    config: StepperConfig = StepperConfig()) -> LipschitzReport:
    """max over pairs of ||xi(t)|| / ||xi(0)|| against min(e^{C* t}, e^{C_* t / 2})."""
    g0 = np.asarray(g0, dtype=float)
    h0 = np.asarray(h0, dtype=float)
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    if t_grid[0] < 0:
        raise ValidationError("t_grid must be nonnegative")
    n = g0.shape[0]
    T = float(t_grid[-1])
    if T > 0:
        run = evolve_batch(basis, np.concatenate([g0, h0]), params, T, config, observe=pair_observer(basis), groups=2)
        times, xi = run.times, run.observed[..., 0]
    else:
        times = np.array([0.0])
        d = g0 - h0
        xi = np.sqrt(np.sum(d * d, axis=(-2, -1)))[None]
    x0 = xi[0]
    if np.any(x0 <= 0):
        raise ValidationError("every pair must start at distinct states")
    ratios = xi / x0
    idx = _grid_indices(times, t_grid)
    c_star, c_cpl = monotone_constant(params), coupled_constant(params)
    return LipschitzReport(t_grid, ratios[idx].max(axis=1), np.exp(c_star * t_grid), np.exp(c_cpl * t_grid / 2), n,
                           ratios.max(axis=0))


@dataclass
class TimeLipschitzReport:
    t_star: float
    G: float
    c_E: float
    L: float
    n_states: int
    n_checked: int
    max_quotient: float          # max ||S(t)g - S(tau)g||_H / |t - tau|
    small_sep_slope: float       # max quotient over the smallest separations
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d


def time_lipschitz_probe(basis: SpectralBasis, states, params: HRParameters, t_star: float, c_E: float,
                         config: StepperConfig = StepperConfig(record_every=10), G: Optional[float] = None,
                         max_pairs: int = 4000, rng=None) -> TimeLipschitzReport:
    """Check ||S(t) g - S(tau) g||_H <= L(M) |t - tau| on recorded times in [0, t_star].

    G defaults to the largest E-norm seen along the integrated trajectories.
    """
    states = np.asarray(states, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    run = evolve_batch(basis, states, params, t_star, config, observe=lambda c: c.copy())
    traj = run.observed                      # (S, B, 3, m)
    times = run.times
    G_meas = float(np.max(state_norms(basis, traj, "H1")))
    G = G_meas if G is None else float(G)
    L = time_lipschitz_constant(params, G, c_E)
    S = len(times)
    i, j = np.triu_indices(S, k=1)
    if i.size > max_pairs:
        pick = rng.choice(i.size, size=max_pairs, replace=False)
        near = np.nonzero(j - i == 1)[0]
        pick = np.union1d(pick, near)
        i, j = i[pick], j[pick]
    worst, slope, viol = 0.0, 0.0, 0
    for b in range(traj.shape[1]):
        d = traj[j, b] - traj[i, b]
        lhs = np.sqrt(np.sum(d * d, axis=(-2, -1)))
        sep = times[j] - times[i]
        q = lhs / sep
        worst = max(worst, float(q.max()))
        slope = max(slope, float(q[j - i == 1].max()))
        viol += int(np.sum(lhs > L * sep * (1 + SLACK)))
    return TimeLipschitzReport(float(t_star), G, float(c_E), L, int(traj.shape[1]), int(i.size * traj.shape[1]),
                               worst, slope, viol)
