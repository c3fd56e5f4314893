"""Determining-modes experiment: low-mode convergence should force full convergence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..integrator import StepperConfig, evolve_batch, pair_observer
from ..model import HRParameters
from ..spectral import SpectralBasis


@dataclass
class DeterminingReport:
    m: int
    horizon: float
    tol_P: float
    tol_full: float
    final_fraction: float
    pairs: list

    @property
    def counterexamples(self) -> int:
        return sum(p["status"] == "counterexample" for p in self.pairs)

    @property
    def n_premise(self) -> int:
        return sum(p["premise"] for p in self.pairs)

    @property
    def verdict(self) -> str:
        return "pass" if self.counterexamples == 0 else "fail"

    def to_dict(self) -> dict:
        return {"m": self.m, "horizon": self.horizon, "tol_P": self.tol_P, "tol_full": self.tol_full,
                "final_fraction": self.final_fraction, "pairs": self.pairs, "n_premise": self.n_premise,
                "counterexamples": self.counterexamples, "verdict": self.verdict}


def determining_modes_experiment(basis: SpectralBasis, g0, h0, m: int, horizon: float, params: HRParameters,
                                 config: StepperConfig = StepperConfig(record_every=100), tol_P: float = 1e-6,
                                 tol_full: float = 1e-4, final_fraction: float = 0.2, labels=None) -> DeterminingReport:
    """Classify pairs on the final window as holds / counterexample / vacuous.

    The premise is ||P_m xi|| < tol_P throughout the window; the conclusion is
    ||xi|| < tol_full throughout it.  ``persistent`` marks pairs whose full
    distance never drops below tol_full in the window; for those the low-mode
    distance must not satisfy the premise (the contrapositive reading).
    """
    g0 = np.asarray(g0, dtype=float)
    h0 = np.asarray(h0, dtype=float)
    if not 1 <= m <= basis.m_max:
        raise ValidationError(f"m must lie in [1, {basis.m_max}], got {m}")
    if not 0 < final_fraction <= 1:
        raise ValidationError(f"final_fraction must lie in (0, 1], got {final_fraction}")
    run = evolve_batch(basis, np.concatenate([g0, h0]), params, horizon, config,
                       observe=pair_observer(basis, (m,)), groups=2)
    win = run.times >= (1 - final_fraction) * horizon - 1e-12
    full = run.observed[win, :, 0]
    low = run.observed[win, :, 1]
    pairs = []
    for i in range(g0.shape[0]):
        premise = bool(np.all(low[:, i] < tol_P))
        conclusion = bool(np.all(full[:, i] < tol_full))
        identical = bool(run.observed[0, i, 0] == 0)
        if premise:
            status = "holds" if conclusion else "counterexample"
        else:
            status = "vacuous"
        persistent = bool(np.all(full[:, i] >= tol_full))
        pairs.append({
            "index": i,
            "kind": None if labels is None else labels[i],
            "identical": identical,
            "xi0": float(run.observed[0, i, 0]),
            "premise": premise,
            "conclusion": conclusion,
            "status": status,
            "max_low_window": float(low[:, i].max()),
            "max_full_window": float(full[:, i].max()),
            "min_full_window": float(full[:, i].min()),
            "persistent_full": persistent,
            "contrapositive_ok": (not persistent) or (not premise),
        })
    return DeterminingReport(m, float(horizon), tol_P, tol_full, final_fraction, pairs)


def perturbed_pairs(basis: SpectralBasis, samples, n_pairs: int, m: int, rng, eps: float = 1e-4):
    """Pairs h = g + eps * d with d supported on the non-constant modes (both below and above m).

    Diffusion damps every non-constant mode, so these pairs are the natural
    candidates for a satisfied premise.
    """
    samples = np.asarray(samples, dtype=float)
    g0 = samples[rng.integers(samples.shape[0], size=n_pairs)]
    d = np.zeros_like(g0)
    d[..., 1:] = rng.standard_normal((n_pairs, 3, basis.m_max - 1))
    d /= np.sqrt(np.sum(d * d, axis=(-2, -1), keepdims=True))
    return g0, g0 + eps * d


def chaotic_pairs(samples, n_pairs: int, rng):
    """Pairs of distinct sampled states (for the contrapositive check)."""
    samples = np.asarray(samples, dtype=float)
    i = rng.integers(samples.shape[0], size=n_pairs)
    j = (i + 1 + rng.integers(samples.shape[0] - 1, size=n_pairs)) % samples.shape[0]
    return samples[i], samples[j]
