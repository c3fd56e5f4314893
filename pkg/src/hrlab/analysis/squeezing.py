"""Mode-count selection, contraction factors, the squeezing dichotomy and Phi.

Eigenvalues entering these formulas are the decay rates of the slowest
component, ``d_min * lambda_k``; with unit diffusivities they coincide with
the Laplacian eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..integrator import StepperConfig, evolve_batch, pair_observer
from ..model import HRParameters, coupled_constant, monotone_constant
from ..spectral import DomainSpec, SpectralBasis, build_basis

CONE_SLACK = 1e-12
GRONWALL_SLACK = 1e-6
PHI_SLACK = 1e-6


def effective_eigenvalues(basis: SpectralBasis, params: Optional[HRParameters] = None) -> np.ndarray:
    scale = 1.0 if params is None else float(params.diffusivities.min())
    return scale * basis.eigenvalues


def mode_condition(lam, C: float):
    """lambda - C (sqrt(lambda) + 1) > 2 C (sqrt(lambda) + 1)."""
    lam = np.asarray(lam, dtype=float)
    s = np.sqrt(lam) + 1.0
    return lam - C * s > 2 * C * s


def select_m(lipschitz_C: float, basis: SpectralBasis, params: Optional[HRParameters] = None) -> int:
    """Smallest m (1-based) whose eigenvalue satisfies the mode condition."""
    if not lipschitz_C >= 0:
        raise ValidationError(f"lipschitz_C must be >= 0, got {lipschitz_C}")
    ok = np.nonzero(mode_condition(effective_eigenvalues(basis, params), lipschitz_C))[0]
    if ok.size == 0:
        lam = effective_eigenvalues(basis, params)[-1]
        raise ValidationError(
            f"no retained eigenvalue satisfies lambda > 3C(sqrt(lambda)+1) for C={lipschitz_C:.6g} "
            f"(largest lambda={lam:.6g}); increase m_max"
        )
    return int(ok[0]) + 1


def required_eigenvalue(lipschitz_C: float) -> float:
    """Threshold eigenvalue: the positive root of lambda = 3C (sqrt(lambda) + 1)."""
    C = float(lipschitz_C)
    x = (3 * C + math.sqrt(9 * C * C + 12 * C)) / 2
    return x * x


def basis_for_selection(lengths, lipschitz_C: float, params: Optional[HRParameters] = None, extra: int = 24,
                        start: int = 64, limit: int = 1 << 16):
    """Smallest doubling-grown basis on which :func:`select_m` succeeds, plus ``extra`` modes.

    Returns ``(basis, m)``.
    """
    size = start
    while size <= limit:
        basis = build_basis(DomainSpec.for_modes(lengths, size), size)
        try:
            m = select_m(lipschitz_C, basis, params)
        except ValidationError:
            size *= 2
            continue
        total = m + extra
        return build_basis(DomainSpec.for_modes(lengths, total), total), m
    raise ValidationError(f"no basis up to {limit} modes satisfies the mode condition for C={lipschitz_C:.6g}")


STEP2_DIVISORS = {"step2": 6.0, "step2_alt": 3.0}
STEP3_FACTORS = {"step3": 2.0, "step3_intermediate": 1.0}


def log_delta_theoretical(lambda_m: float, c_star: float, variant: str = "step2",
                          lipschitz_C: Optional[float] = None) -> float:
    """Natural log of the contraction factor (finite even when delta overflows)."""
    if not lambda_m > 0:
        raise ValidationError(f"lambda_m must be > 0, got {lambda_m}")
    if variant in STEP2_DIVISORS:
        return 0.5 * math.log(2) - lambda_m / STEP2_DIVISORS[variant] + c_star / 2
    if variant in STEP3_FACTORS:
        if lipschitz_C is None:
            raise ValidationError(f"variant {variant!r} needs lipschitz_C")
        C = float(lipschitz_C)
        if C == 0:
            return -math.inf
        x = lambda_m / (2 * C * (math.sqrt(lambda_m) + 1))
        return 0.5 * math.log(2) + math.log(x + 0.5) - x + 2 + STEP3_FACTORS[variant] * C
    raise ValidationError(f"unknown delta variant {variant!r}")


def delta_theoretical(lambda_m: float, c_star: float, variant: str = "step2",
                      lipschitz_C: Optional[float] = None) -> float:
    """Contraction factor of the squeezing argument.

    ``step2``: sqrt(2) e^{-lambda_m/6} e^{C*/2};  ``step3``:
    sqrt(2) (x + 1/2) e^{-x} e^{2 + 2C} with x = lambda_m / (2 C (sqrt(lambda_m) + 1)).
    ``step2_alt`` (exponent lambda_m/3) and ``step3_intermediate`` (e^{2 + C})
    are the neighbouring readings of the same bounds.  Overflow returns inf.
    """
    lg = log_delta_theoretical(lambda_m, c_star, variant, lipschitz_C)
    return math.exp(lg) if lg < 709 else math.inf


def phi_value(p, q, lambda_m: float, C_m: float):
    """(p + q) exp(lambda_m q / (C_m (p + q))); NaN where p + q = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    s = p + q
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = s * np.exp(lambda_m * q / (C_m * s))
    return np.where(s > 0, out, np.nan)


def case3_condition(p, q, lambda_m: float, C_m: float):
    """(lambda_m - C_m) ||q|| >= 2 C_m ||p||."""
    return (lambda_m - C_m) * np.asarray(q) >= 2 * C_m * np.asarray(p)


def phi_nonincrease(times, p, q, lambda_m: float, C_m: float, rel_slack: float = PHI_SLACK) -> dict:
    """Check Phi(t_{i+1}) <= Phi(t_i)(1 + slack) where both samples qualify.

    The series is cut at the first sample with p + q = 0 (Phi undefined).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    s = p + q
    zero = np.nonzero(s <= 0)[0]
    halted = zero.size > 0
    n = int(zero[0]) if halted else len(s)
    phi = phi_value(p[:n], q[:n], lambda_m, C_m)
    good = case3_condition(p[:n], q[:n], lambda_m, C_m)
    pairs = good[:-1] & good[1:]
    worse = phi[1:] > phi[:-1] * (1 + rel_slack)
    bad = pairs & worse
    worst = float(np.max(phi[1:][pairs] / phi[:-1][pairs])) if np.any(pairs) else None
    return {
        "n_samples": n,
        "n_qualifying": int(good.sum()),
        "n_checked": int(pairs.sum()),
        "n_violations": int(bad.sum()),
        "worst_ratio": worst,
        "undefined_halt": bool(halted),
        "halt_time": float(times[n]) if halted else None,
        "phi": phi,
        "qualifying": good,
    }


@dataclass
class SqueezeTheory:
    m: int
    lambda_m: float
    lambda_m_plus_1: Optional[float]
    lipschitz_C: float
    C_m: float
    c_star: float
    c_coupled: float
    delta_step2: float
    delta_step2_alt: float
    delta_step3: float
    delta_step3_intermediate: float
    delta_theory: float
    delta_threshold: float
    delta_cap: float
    n_rank: int
    high_decay_rate_lambda_m: float
    high_decay_rate_lambda_m_plus_1: Optional[float]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def squeeze_theory(basis: SpectralBasis, m: int, params: HRParameters, lipschitz_C: float,
                   delta_threshold: Optional[float] = None, delta_cap: float = 0.5) -> SqueezeTheory:
    """Formula side of the squeeze test; the effective threshold is capped at ``delta_cap``."""
    if not 1 <= m <= basis.m_max:
        raise ValidationError(f"m must lie in [1, {basis.m_max}], got {m}")
    lam = effective_eigenvalues(basis, params)
    lam_m = float(lam[m - 1])
    lam_next = float(lam[m]) if m < basis.m_max else None
    C = float(lipschitz_C)
    C_m = C * (math.sqrt(lam_m) + 1)
    c_star = monotone_constant(params)
    if lam_m > 0:
        d = {v: delta_theoretical(lam_m, c_star, v, C) for v in ("step2", "step2_alt", "step3", "step3_intermediate")}
    else:
        d = {v: math.inf for v in ("step2", "step2_alt", "step3", "step3_intermediate")}
    theory = max(d["step2"], d["step3"])
    chosen = theory if delta_threshold is None else float(delta_threshold)
    return SqueezeTheory(
        m=m, lambda_m=lam_m, lambda_m_plus_1=lam_next, lipschitz_C=C, C_m=C_m, c_star=c_star,
        c_coupled=coupled_constant(params),
        delta_step2=d["step2"], delta_step2_alt=d["step2_alt"], delta_step3=d["step3"],
        delta_step3_intermediate=d["step3_intermediate"], delta_theory=theory,
        delta_threshold=min(chosen, delta_cap), delta_cap=delta_cap, n_rank=3 * m,
        high_decay_rate_lambda_m=lam_m - C_m,
        high_decay_rate_lambda_m_plus_1=None if lam_next is None else lam_next - C_m,
    )


@dataclass
class SqueezeReport:
    m: int
    t_star: float
    pairs: list
    delta_threshold: float
    theory: SqueezeTheory
    phi_series: Optional[list] = None
    delta_distribution: dict = field(default_factory=dict)

    @property
    def dichotomy_ok(self) -> bool:
        return all(p["cone_ok"] or p["contraction_ok"] for p in self.pairs)

    @property
    def gronwall_ok(self) -> bool:
        return all(p["gronwall_ok"] for p in self.pairs)

    @property
    def phi_ok(self) -> bool:
        return all(p.get("phi_violations", 0) == 0 for p in self.pairs)

    @property
    def verdict(self) -> str:
        return "pass" if (self.dichotomy_ok and self.gronwall_ok and self.phi_ok) else "fail"

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "t_star": self.t_star,
            "delta_threshold": self.delta_threshold,
            "theory": self.theory.to_dict(),
            "pairs": self.pairs,
            "delta_distribution": self.delta_distribution,
            "dichotomy_ok": self.dichotomy_ok,
            "gronwall_ok": self.gronwall_ok,
            "phi_ok": self.phi_ok,
            "verdict": self.verdict,
        }


def _distribution(x) -> dict:
    x = np.asarray(x, dtype=float)
    qs = np.quantile(x, [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0])
    return {"n": int(x.size), "min": qs[0], "p10": qs[1], "p25": qs[2], "median": qs[3], "p75": qs[4],
            "p90": qs[5], "max": qs[6], "mean": float(x.mean())}


def squeeze_test(basis: SpectralBasis, g0, h0, m: int, t_star: float, params: HRParameters,
                 config: StepperConfig, lipschitz_C: float, delta_threshold: Optional[float] = None,
                 delta_cap: float = 0.5, labels=None, keep_phi: bool = False) -> SqueezeReport:
    """Run every pair to ``t_star`` and classify it against the dichotomy.

    Per pair this records delta_emp, both branches, the coarse ceiling
    e^{C* t} at every sample, the min(e^{C* t}, e^{C_* t/2}) ceiling and the
    Phi nonincrease check on qualifying samples.
    """
    g0 = np.asarray(g0, dtype=float)
    h0 = np.asarray(h0, dtype=float)
    if g0.shape != h0.shape:
        raise ValidationError("g0 and h0 must have matching shapes")
    n = g0.shape[0]
    th = squeeze_theory(basis, m, params, lipschitz_C, delta_threshold, delta_cap)
    run = evolve_batch(basis, np.concatenate([g0, h0]), params, t_star, config,
                       observe=pair_observer(basis, (m,)), groups=2)
    t = run.times
    obs = run.observed                           # (S, n, 4): |xi|, |P xi|, |Q xi|, max E
    xi, p, q = obs[..., 0], obs[..., 1], obs[..., 2]
    ceiling = np.exp(th.c_star * t)
    ceiling_min = np.minimum(ceiling, np.exp(th.c_coupled * t / 2))
    pairs, phis = [], []
    for i in range(n):
        x0 = xi[0, i]
        ratio = xi[:, i] / x0 if x0 > 0 else np.zeros_like(t)
        d_emp = float(ratio[-1])
        cone = bool(q[-1, i] <= p[-1, i] + CONE_SLACK)
        contraction = bool(d_emp <= th.delta_threshold)
        ph = phi_nonincrease(t, p[:, i], q[:, i], th.lambda_m, th.C_m) if th.C_m > 0 else None
        rec = {
            "index": i,
            "kind": None if labels is None else labels[i],
            "xi0": float(x0),
            "delta_emp": d_emp,
            "cone_ok": cone,
            "contraction_ok": contraction,
            "p_final": float(p[-1, i]),
            "q_final": float(q[-1, i]),
            "gronwall_ok": bool(np.all(ratio <= ceiling * (1 + GRONWALL_SLACK))),
            "k_bound_ok": bool(np.all(ratio <= ceiling_min * (1 + GRONWALL_SLACK))),
            "max_ratio": float(ratio.max()),
            "max_energy": float(obs[:, i, 3].max()),
            "phi_checked": 0 if ph is None else ph["n_checked"],
            "phi_violations": 0 if ph is None else ph["n_violations"],
        }
        pairs.append(rec)
        if keep_phi and ph is not None:
            phis.append({"index": i, "times": t, "phi": ph["phi"], "qualifying": ph["qualifying"]})
    report = SqueezeReport(m, float(t_star), pairs, th.delta_threshold, th, phis if keep_phi else None)
    report.delta_distribution = _distribution([r["delta_emp"] for r in pairs])
    return report


@dataclass
class PhiMonitorResult:
    times: np.ndarray
    p: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    qualifying: np.ndarray
    n_checked: int
    n_violations: int
    worst_ratio: Optional[float]
    undefined_halt: bool
    lambda_m: float
    C_m: float

    @property
    def nonincreasing(self) -> bool:
        return self.n_violations == 0

    def to_dict(self) -> dict:
        return {"n_samples": int(len(self.phi)), "n_qualifying": int(self.qualifying.sum()),
                "n_checked": self.n_checked, "n_violations": self.n_violations, "worst_ratio": self.worst_ratio,
                "undefined_halt": self.undefined_halt, "nonincreasing": self.nonincreasing,
                "lambda_m": self.lambda_m, "C_m": self.C_m}


def phi_monitor(basis: SpectralBasis, g0, h0, m: int, window, params: HRParameters, config: StepperConfig,
                lipschitz_C: float) -> list:
    """Phi series of one or more pairs sampled on ``window = (t0, t1)``.

    Pairs are integrated from 0 to t1 together; samples before t0 are dropped.
    Returns one :class:`PhiMonitorResult` per pair.
    """
    t0, t1 = map(float, window)
    if not 0 <= t0 < t1:
        raise ValidationError(f"window must satisfy 0 <= t0 < t1, got {window}")
    g0 = np.atleast_3d(np.asarray(g0, dtype=float)).reshape(-1, 3, basis.m_max)
    h0 = np.atleast_3d(np.asarray(h0, dtype=float)).reshape(-1, 3, basis.m_max)
    n = g0.shape[0]
    lam_m = float(effective_eigenvalues(basis, params)[m - 1])
    C_m = float(lipschitz_C) * (math.sqrt(lam_m) + 1)
    if not C_m > 0:
        raise ValidationError("Phi needs a positive Lipschitz constant")
    run = evolve_batch(basis, np.concatenate([g0, h0]), params, t1, config, observe=pair_observer(basis, (m,)), groups=2)
    keep = run.times >= t0 - 1e-15
    t = run.times[keep]
    out = []
    for i in range(n):
        p = run.observed[keep, i, 1]
        q = run.observed[keep, i, 2]
        r = phi_nonincrease(t, p, q, lam_m, C_m)
        out.append(PhiMonitorResult(t, p, q, r["phi"], r["qualifying"], r["n_checked"], r["n_violations"],
                                    r["worst_ratio"], r["undefined_halt"], lam_m, C_m))
    return out
