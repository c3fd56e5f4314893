"""Time integration of dg/dt = A g + f(g) in the cosine basis.

Three schemes share one interface:

* ``exponential-euler``: c <- e^{z} c + dt phi1(z) N(c), z = -lambda_k d_i dt
* ``etd-rk2``: the Cox-Matthews corrector
  c <- a + dt phi2(z) (N(a) - N(c)) with a the exponential-Euler predictor
* ``reference-rk4``: classical RK4 on the full stiff system with dt/100 substeps

All work on batches ``(B, 3, m_max)``; batches are split into fixed-size
chunks so results do not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, ValidationError
from .model import HRParameters, nonlinearity_coeffs, ode_rhs
from .spectral import SpectralBasis, State, split_norms

SCHEMES = ("exponential-euler", "etd-rk2", "reference-rk4")
RK4_SUBSTEPS = 100
CHUNK = 32


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-3
    scheme: str = "etd-rk2"
    record_every: int = 1
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"stepper.dt: must be > 0, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"stepper.scheme: must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.record_every) < 1:
            raise ValidationError(f"stepper.record_every: must be >= 1, got {self.record_every}")
        object.__setattr__(self, "record_every", int(self.record_every))


def phi1(z):
    """(e^z - 1) / z with phi1(0) = 1."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def phi2(z):
    """(e^z - 1 - z) / z^2 with phi2(0) = 1/2."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 0.5 + zs / 6 + zs * zs / 24 + zs ** 3 / 120
    zb = z[~small]
    out[~small] = (np.expm1(zb) - zb) / (zb * zb)
    return out


def worker_count() -> int:
    env = os.environ.get("HRLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"HRLAB_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


Nonlinearity = Callable[[SpectralBasis, np.ndarray], np.ndarray]


class Stepper:
    """Precomputed propagator for one (basis, params, config) triple."""

    def __init__(self, basis: SpectralBasis, params: HRParameters, config: StepperConfig,
                 nonlinearity: Optional[Nonlinearity] = None):
        self.basis = basis
        self.params = params
        self.config = config
        if nonlinearity is None:
            self.N = lambda c: nonlinearity_coeffs(basis, c, params, check=False)
        else:
            self.N = lambda c: nonlinearity(basis, c)
        # decay rates lambda_k d_i, shape (3, m)
        self.rates = params.diffusivities[:, None] * basis.eigenvalues[None, :]
        dt = config.dt
        z = -self.rates * dt
        self.E = np.exp(z)
        self.P1 = dt * phi1(z)
        self.P2 = dt * phi2(z)
        self.h = dt / RK4_SUBSTEPS

    def _rk4_rhs(self, c):
        return -self.rates * c + self.N(c)

    def advance(self, c: np.ndarray) -> np.ndarray:
        scheme = self.config.scheme
        if scheme == "exponential-euler":
            return self.E * c + self.P1 * self.N(c)
        if scheme == "etd-rk2":
            n0 = self.N(c)
            a = self.E * c + self.P1 * n0
            return a + self.P2 * (self.N(a) - n0)
        h = self.h
        for _ in range(RK4_SUBSTEPS):
            k1 = self._rk4_rhs(c)
            k2 = self._rk4_rhs(c + 0.5 * h * k1)
            k3 = self._rk4_rhs(c + 0.5 * h * k2)
            k4 = self._rk4_rhs(c + h * k3)
            c = c + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        return c


def _check(c, threshold, t_prev):
    sq = np.sum(c * c, axis=(-2, -1))
    if not np.all(np.isfinite(sq)) or np.any(sq > threshold * threshold):
        bad = np.nanmax(np.where(np.isfinite(sq), np.sqrt(sq), np.inf))
        raise BlowUpError(
            f"state norm {bad:.3g} exceeded {threshold:.3g} after t={t_prev:.6g}; reduce dt",
            last_time=t_prev,
            last_norm=float(bad),
        )


def default_observer(basis: SpectralBasis):
    """Per-component (L2, H1) norms: ``(B, 3, 2)`` per record."""
    def obs(c):
        return np.stack([basis.l2(c), basis.h1(c)], axis=-1)
    return obs


@dataclass
class BatchRun:
    times: np.ndarray
    observed: np.ndarray          # (S, B, ...)
    final: np.ndarray             # (B, 3, m)
    states: Optional[np.ndarray]  # (S, B, 3, m) when kept


def _run_chunk(stepper, c0, n_steps, t0, observe, keep_states):
    cfg = stepper.config
    c = np.array(c0, dtype=float)
    obs = [observe(c)]
    kept = [c.copy()] if keep_states else None
    for n in range(1, n_steps + 1):
        t_prev = t0 + (n - 1) * cfg.dt
        c = stepper.advance(c)
        _check(c, cfg.blowup_threshold, t_prev)
        if n % cfg.record_every == 0 or n == n_steps:
            obs.append(observe(c))
            if keep_states:
                kept.append(c.copy())
    return np.stack(obs), c, (np.stack(kept) if keep_states else None)


def n_steps_for(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValidationError(f"horizon T={T} is not a whole number of steps dt={dt}")
    return n


def record_times(n_steps: int, config: StepperConfig, t0: float = 0.0) -> np.ndarray:
    idx = [0] + [n for n in range(1, n_steps + 1) if n % config.record_every == 0 or n == n_steps]
    return t0 + np.array(idx, dtype=float) * config.dt


def evolve_batch(basis: SpectralBasis, coeffs, params: HRParameters, T: float, config: StepperConfig,
                 observe=None, keep_states: bool = False, t0: float = 0.0,
                 nonlinearity: Optional[Nonlinearity] = None, groups: int = 1) -> BatchRun:
    """Integrate a batch of states ``(B, 3, m)`` to time ``t0 + T``.

    With ``groups = k`` the batch is read as k equal blocks (for pairs:
    [g_1..g_n, h_1..h_n]) and every chunk carries matching slices of each
    block, so an observer sees the same layout on every chunk.  Observations
    are concatenated along the per-block axis.
    """
    c0 = np.asarray(coeffs, dtype=float)
    if c0.ndim != 3 or c0.shape[1:] != (3, basis.m_max):
        raise ValidationError(f"batch must have shape (B, 3, {basis.m_max}), got {c0.shape}")
    if not np.all(np.isfinite(c0)):
        raise ValidationError("initial states must be finite")
    if groups < 1 or c0.shape[0] % groups:
        raise ValidationError(f"batch size {c0.shape[0]} is not divisible into {groups} groups")
    observe = observe or default_observer(basis)
    n_steps = n_steps_for(T, config.dt)
    stepper = Stepper(basis, params, config, nonlinearity)
    blocks = c0.reshape(groups, -1, 3, basis.m_max)
    step_n = max(1, CHUNK // groups)
    n = blocks.shape[1]
    chunks = [blocks[:, i:i + step_n].reshape(-1, 3, basis.m_max) for i in range(0, n, step_n)]
    work = lambda ch: _run_chunk(stepper, ch, n_steps, t0, observe, keep_states)
    workers = min(worker_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(ch) for ch in chunks]

    def regroup(arrays, lead):
        # per chunk (lead..., groups * k, ...) -> (lead..., groups * n, 3, m) in block order
        parts = [a.reshape(a.shape[:lead] + (groups, -1) + a.shape[lead + 1:]) for a in arrays]
        joined = np.concatenate(parts, axis=lead + 1)
        return joined.reshape(joined.shape[:lead] + (-1,) + joined.shape[lead + 2:])

    per_state = all(r[0].shape[1] == ch.shape[0] for r, ch in zip(results, chunks))
    if groups > 1 and per_state:
        observed = regroup([r[0] for r in results], 1)
    else:
        observed = np.concatenate([r[0] for r in results], axis=1)
    final = regroup([r[1] for r in results], 0)
    states = regroup([r[2] for r in results], 1) if keep_states else None
    return BatchRun(record_times(n_steps, config, t0), observed, final, states)


# ----------------------------------------------------------------------------
# single-trajectory API


@dataclass
class Trajectory:
    """Recorded samples of one solution; ``norms[s, i] = (L2, H1)`` of component i."""

    basis: SpectralBasis
    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    blew_up: bool = False
    blowup_time: Optional[float] = None

    def state(self, i: int) -> State:
        return State(self.basis, self.states[i])

    @property
    def norm_E(self) -> np.ndarray:
        return np.sqrt(np.sum(self.norms[..., 1] ** 2, axis=-1))

    @property
    def norm_H(self) -> np.ndarray:
        return np.sqrt(np.sum(self.norms[..., 0] ** 2, axis=-1))


def step(state: State, params: HRParameters, config: StepperConfig,
         nonlinearity: Optional[Nonlinearity] = None) -> State:
    """Advance one state by a single step ``config.dt``."""
    stepper = Stepper(state.basis, params, config, nonlinearity)
    c = stepper.advance(np.array(state.coeffs)[None])
    _check(c, config.blowup_threshold, 0.0)
    return State(state.basis, c[0])


def evolve(state: State, params: HRParameters, T: float, config: StepperConfig,
           nonlinearity: Optional[Nonlinearity] = None, allow_blowup: bool = False) -> Trajectory:
    """Integrate one state over [0, T], recording every ``record_every`` steps.

    With ``allow_blowup`` a runaway is returned as a truncated trajectory with
    ``blew_up`` set instead of raising.
    """
    if not T > 0:
        raise ValidationError(f"T must be > 0, got {T}")
    basis = state.basis
    n_steps = n_steps_for(T, config.dt)
    stepper = Stepper(basis, params, config, nonlinearity)
    c = np.array(state.coeffs)[None]
    times, states = [0.0], [c[0].copy()]
    try:
        for n in range(1, n_steps + 1):
            t_prev = (n - 1) * config.dt
            c = stepper.advance(c)
            _check(c, config.blowup_threshold, t_prev)
            if n % config.record_every == 0 or n == n_steps:
                times.append(n * config.dt)
                states.append(c[0].copy())
    except BlowUpError as err:
        if not allow_blowup:
            raise
        blown = err.last_time
    else:
        blown = None
    S = np.array(states)
    norms = np.stack([basis.l2(S), basis.h1(S)], axis=-1)
    return Trajectory(basis, np.array(times), S, norms, blew_up=blown is not None, blowup_time=blown)


@dataclass
class PairRun:
    g: Trajectory
    h: Trajectory
    times: np.ndarray
    diff: np.ndarray                          # ||xi(t)|| in H
    low: dict = field(default_factory=dict)   # m -> ||P_m xi(t)||
    high: dict = field(default_factory=dict)  # m -> ||Q_m xi(t)||


def evolve_pair(g0: State, h0: State, params: HRParameters, T: float, config: StepperConfig,
                projections=()) -> PairRun:
    """Co-timed integration of two states with difference-norm series."""
    if g0.basis is not h0.basis:
        raise ValidationError("both states must live on the same basis")
    basis = g0.basis
    run = evolve_batch(basis, np.stack([g0.coeffs, h0.coeffs]), params, T, config, keep_states=True, groups=2)
    S = run.states
    traj = []
    for j in range(2):
        norms = np.stack([basis.l2(S[:, j]), basis.h1(S[:, j])], axis=-1)
        traj.append(Trajectory(basis, run.times, S[:, j], norms))
    xi = S[:, 0] - S[:, 1]
    out = PairRun(traj[0], traj[1], run.times, np.sqrt(np.sum(xi * xi, axis=(-2, -1))))
    for spec in projections:
        m = getattr(spec, "m", spec)
        out.low[m], out.high[m] = split_norms(xi, m)
    return out


def pair_observer(basis: SpectralBasis, ms=()):
    """Observer for chunks laid out as [g_1..g_k, h_1..h_k] (use with ``groups=2``).

    Per pair it records ||xi||, then (||P_m xi||, ||Q_m xi||) for each m, then
    the larger of the two E-norms.
    """
    ms = tuple(ms)

    def obs(c):
        n_pairs = c.shape[0] // 2
        xi = c[:n_pairs] - c[n_pairs:]
        cols = [np.sqrt(np.sum(xi * xi, axis=(-2, -1)))]
        for m in ms:
            lo, hi = split_norms(xi, m)
            cols += [lo, hi]
        cols.append(np.sqrt(np.sum(basis.h1(c) ** 2, axis=-1)).reshape(2, n_pairs).max(axis=0))
        return np.stack(cols, axis=-1)
    return obs


# ----------------------------------------------------------------------------
# ODE oracle


def ode_rk4(y0, params: HRParameters, T: float, dt: float = 1e-3, record_every: int = 1):
    """Classical RK4 on the three-variable ODE; returns (times, values).

    Written with plain floats: for a 3-vector the interpreter beats numpy's
    per-call overhead by an order of magnitude.
    """
    n = n_steps_for(T, dt)
    a, b, al, be, q, r, J, c = (params.a, params.b, params.alpha, params.beta,
                                params.q, params.r, params.J, params.c)

    def f(u, v, w):
        return a * u * u - b * u * u * u + v - w + J, al - be * u * u - v, q * (u - c) - r * w

    u, v, w = (float(x) for x in y0)
    h2, h6 = dt / 2, dt / 6
    ts, ys = [0.0], [(u, v, w)]
    for i in range(1, n + 1):
        k1u, k1v, k1w = f(u, v, w)
        k2u, k2v, k2w = f(u + h2 * k1u, v + h2 * k1v, w + h2 * k1w)
        k3u, k3v, k3w = f(u + h2 * k2u, v + h2 * k2v, w + h2 * k2w)
        k4u, k4v, k4w = f(u + dt * k3u, v + dt * k3v, w + dt * k3w)
        u += h6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v += h6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        w += h6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        if i % record_every == 0 or i == n:
            ts.append(i * dt)
            ys.append((u, v, w))
    return np.array(ts), np.array(ys)
