"""Empirical absorbing ball: radius, entry times and re-entry check."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..integrator import StepperConfig, evolve_batch
from ..model import HRParameters
from ..spectral import SpectralBasis, state_norms


def _energy_observer(basis):
    return lambda c: state_norms(basis, c, "H1")


@dataclass
class AbsorptionReport:
    """q_estimate, per-member entry times and the series they were read from.

    ``entry_times[i]`` is the first recorded time after which member i stays
    within q_estimate; ``None`` means it never settled within the horizon.
    A member counts as entered only if it settled before the tail window the
    radius is measured on.
    """

    q_estimate: float
    entry_times: list
    ensemble_size: int
    horizon: float
    initial_norms: np.ndarray
    tail_max: np.ndarray
    times: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)        # (S, B) E-norms
    states: Optional[np.ndarray] = field(default=None, repr=False)  # (S', B, 3, m) at sample_times
    sample_times: Optional[np.ndarray] = field(default=None, repr=False)
    tail_fraction: float = 0.2
    margin: float = 1.05
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not self.q_estimate > 0:
            raise ValidationError(f"q_estimate must be > 0, got {self.q_estimate}")

    @property
    def tail_start(self) -> float:
        return (1 - self.tail_fraction) * self.horizon

    def entered(self, te) -> bool:
        return te is not None and te <= self.tail_start + 1e-9

    @property
    def all_entered(self) -> bool:
        return all(self.entered(t) for t in self.entry_times)

    def post_entry_states(self) -> np.ndarray:
        """Recorded states after each member's entry time, flattened to ``(n, 3, m)``."""
        if self.states is None:
            raise ValidationError("absorption run did not keep states")
        out = []
        for b, te in enumerate(self.entry_times):
            if te is not None:
                out.append(self.states[self.sample_times >= te, b])
        if not out:
            raise ValidationError("no member entered the probed ball")
        return np.concatenate(out)

    def to_dict(self) -> dict:
        return {
            "q_estimate": self.q_estimate,
            "entry_times": self.entry_times,
            "ensemble_size": self.ensemble_size,
            "horizon": self.horizon,
            "initial_norms": self.initial_norms,
            "tail_max": self.tail_max,
            "tail_fraction": self.tail_fraction,
            "margin": self.margin,
            "tail_start": self.tail_start,
            "all_entered": self.all_entered,
            "warnings": self.warnings,
        }


def entry_time(times, norms, q) -> Optional[float]:
    """First recorded time after which ``norms <= q`` holds at every later sample."""
    outside = np.nonzero(np.asarray(norms) > q)[0]
    if outside.size == 0:
        return float(times[0])
    last = outside[-1]
    if last == len(times) - 1:
        return None
    return float(times[last + 1])


def absorption_probe(basis: SpectralBasis, initial, params: HRParameters, horizon: float = 200.0,
                     config: StepperConfig = StepperConfig(record_every=100), tail_fraction: float = 0.2,
                     margin: float = 1.05, warmup_time: float = 0.5, warmup_dt: float = 5e-5,
                     sample_every: Optional[int] = None) -> AbsorptionReport:
    """Integrate an ensemble and estimate the absorbing radius from its tail.

    Large initial data make the cubic term stiff, so the first ``warmup_time``
    units run with the finer step ``warmup_dt``.  ``sample_every`` keeps the
    full state every that many records for later pair experiments.
    """
    initial = np.asarray(initial, dtype=float)
    if not 0 < tail_fraction <= 1:
        raise ValidationError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    if not 0 <= warmup_time < horizon:
        raise ValidationError(f"warmup_time must lie in [0, horizon), got {warmup_time}")
    obs = _energy_observer(basis)
    parts_t, parts_n = [], []
    start = initial
    if warmup_time > 0:
        rec = max(1, int(round(config.record_every * config.dt / warmup_dt)))
        wcfg = replace(config, dt=warmup_dt, record_every=rec)
        w = evolve_batch(basis, initial, params, warmup_time, wcfg, observe=obs)
        parts_t.append(w.times[:-1])
        parts_n.append(w.observed[:-1])
        start = w.final
    keep = sample_every is not None
    if keep:
        obs_main = lambda c: c.copy()
        run = evolve_batch(basis, start, params, horizon - warmup_time, config, observe=obs_main, t0=warmup_time)
        full = run.observed
        idx = np.arange(0, len(run.times), int(sample_every))
        states, sample_times = full[idx], run.times[idx]
        main_norms = state_norms(basis, full, "H1")
    else:
        run = evolve_batch(basis, start, params, horizon - warmup_time, config, observe=obs, t0=warmup_time)
        states = sample_times = None
        main_norms = run.observed
    parts_t.append(run.times)
    parts_n.append(main_norms)
    times = np.concatenate(parts_t)
    norms = np.concatenate(parts_n)

    tail = times >= (1 - tail_fraction) * horizon - 1e-12
    tail_max = norms[tail].max(axis=0)
    q = margin * float(tail_max.max())
    entries = [entry_time(times, norms[:, b], q) for b in range(norms.shape[1])]
    notes = []
    tail_start = (1 - tail_fraction) * horizon
    for b, te in enumerate(entries):
        if te is None:
            msg = f"member {b} never entered the ball of radius {q:.6g} within horizon {horizon}; lengthen the horizon"
        elif te > tail_start + 1e-9:
            msg = (f"member {b} entered the ball of radius {q:.6g} only at t={te:.6g}, inside the tail window "
                   f"starting at {tail_start:.6g}; lengthen the horizon")
        else:
            continue
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    return AbsorptionReport(
        q_estimate=q,
        entry_times=entries,
        ensemble_size=int(initial.shape[0]),
        horizon=float(horizon),
        initial_norms=state_norms(basis, initial, "H1"),
        tail_max=tail_max,
        times=times,
        norms=norms,
        states=states,
        sample_times=sample_times,
        tail_fraction=tail_fraction,
        margin=margin,
        warnings=notes,
    )


@dataclass
class ReentryCheck:
    q_estimate: float
    horizon: float
    n_restarts: int
    max_norm: float
    restart_times: list

    @property
    def ok(self) -> bool:
        return self.max_norm <= self.q_estimate

    def to_dict(self) -> dict:
        return {"q_estimate": self.q_estimate, "horizon": self.horizon, "n_restarts": self.n_restarts,
                "max_norm": self.max_norm, "restart_times": self.restart_times, "ok": self.ok}


def reentry_check(basis: SpectralBasis, report: AbsorptionReport, params: HRParameters,
                  config: StepperConfig = StepperConfig(record_every=100), horizon: Optional[float] = None,
                  rng=None) -> ReentryCheck:
    """Restart each member from a random kept state after its entry time and track ||g||_E."""
    if report.states is None:
        raise ValidationError("re-entry check needs an absorption run with kept states")
    rng = np.random.default_rng(0) if rng is None else rng
    horizon = report.horizon if horizon is None else horizon
    starts, when = [], []
    for b, te in enumerate(report.entry_times):
        if te is None:
            continue
        idx = np.nonzero(report.sample_times >= te)[0]
        if idx.size == 0:
            continue
        j = int(rng.choice(idx))
        starts.append(report.states[j, b])
        when.append(float(report.sample_times[j]))
    if not starts:
        raise ValidationError("no post-entry state available for restart")
    run = evolve_batch(basis, np.array(starts), params, horizon, config, observe=_energy_observer(basis))
    return ReentryCheck(report.q_estimate, float(horizon), len(starts), float(run.observed.max()), when)
