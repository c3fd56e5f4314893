"""Diffusive Hindmarsh-Rose reaction terms and their explicit constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy import optimize

from .errors import ValidationError
from .spectral import SpectralBasis, State

PARAM_NAMES = ("d1", "d2", "d3", "a", "b", "alpha", "beta", "q", "r", "J", "c")


@dataclass(frozen=True)
class HRParameters:
    """Model constants.  All positive except the reference potential ``c``.

    The classical ODE parameterisation writes q = r * S; ``q`` is stored
    directly (S = 4 gives the default q = 0.0084).  Diffusivities have no
    canonical values and default to one.
    """

    d1: float = 1.0
    d2: float = 1.0
    d3: float = 1.0
    a: float = 3.0
    b: float = 1.0
    alpha: float = 1.0
    beta: float = 5.0
    q: float = 0.0084
    r: float = 0.0021
    J: float = 3.281
    c: float = -1.6

    def __post_init__(self):
        for f in fields(self):
            val = float(getattr(self, f.name))
            object.__setattr__(self, f.name, val)
            if not math.isfinite(val):
                raise ValidationError(f"params.{f.name}: must be finite, got {val}")
            if f.name != "c" and not val > 0:
                raise ValidationError(f"params.{f.name}: must be > 0 (all parameters except c are positive), got {val}")

    @classmethod
    def from_S(cls, S: float, **kw) -> "HRParameters":
        r = kw.get("r", cls.r)
        return cls(q=r * S, **kw)

    @property
    def diffusivities(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3])

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "HRParameters":
        return replace(self, **kw)


PRESETS = {"paper-typical": HRParameters()}


def preset(name: str) -> HRParameters:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown parameter preset {name!r}; known: {sorted(PRESETS)}") from None


# ----------------------------------------------------------------------------
# pointwise reaction terms


def phi(u, p: HRParameters):
    return p.a * u * u - p.b * u ** 3


def psi(u, p: HRParameters):
    return p.alpha - p.beta * u * u


def ode_rhs(point, params: HRParameters) -> np.ndarray:
    """Diffusion-free HR vector field; ``point`` has trailing axis (u, v, w)."""
    y = np.asarray(point, dtype=float)
    u, v, w = y[..., 0], y[..., 1], y[..., 2]
    return np.stack(
        [
            phi(u, params) + v - w + params.J,
            psi(u, params) - v,
            params.q * (u - params.c) - params.r * w,
        ],
        axis=-1,
    )


def nonlinearity_coeffs(basis: SpectralBasis, coeffs, params: HRParameters, check: bool = True) -> np.ndarray:
    """Galerkin projection of f(g) for state arrays ``(..., 3, m_max)``.

    Only u enters nonlinearly, so a single inverse transform of u and one
    forward transform of (u^2, u^3) suffice; v and w terms are added in
    coefficient space where they are already exact.
    """
    c = np.asarray(coeffs, dtype=float)
    u = basis.to_grid(c[..., 0, :])
    with np.errstate(over="ignore", invalid="ignore"):
        u2 = u * u
        cubes = np.stack([u2, u2 * u], axis=-basis.dims - 1)
    if check and not np.all(np.isfinite(cubes)):
        raise FloatingPointError("non-finite grid values in nonlinearity (blow-up upstream)")
    with np.errstate(invalid="ignore"):
        powers = basis.to_coeffs(cubes)
    u2h, u3h = powers[..., 0, :], powers[..., 1, :]
    root = math.sqrt(basis.domain.volume)
    out = np.empty_like(c)
    out[..., 0, :] = params.a * u2h - params.b * u3h + c[..., 1, :] - c[..., 2, :]
    out[..., 0, 0] += params.J * root
    out[..., 1, :] = -params.beta * u2h - c[..., 1, :]
    out[..., 1, 0] += params.alpha * root
    out[..., 2, :] = params.q * c[..., 0, :] - params.r * c[..., 2, :]
    out[..., 2, 0] -= params.q * params.c * root
    return out


def nonlinearity(state: State, params: HRParameters) -> State:
    """f(u, v, w) = (phi(u) + v - w + J, psi(u) - v, q(u - c) - r w), truncated."""
    return State(state.basis, nonlinearity_coeffs(state.basis, state.coeffs, params))


# ----------------------------------------------------------------------------
# constants


def monotone_constant(params: HRParameters) -> float:
    """C* in <f(g) - f(h), g - h> <= C* ||g - h||^2."""
    p = params
    return max(1 + p.q + 2 * p.a ** 2 / p.b, 2 + 2 * p.beta ** 2 / p.b, 1 + p.q + p.r)


def coupled_constant(params: HRParameters) -> float:
    """C_* in d/dt ||g - h||^2 <= C_* ||g - h||^2."""
    p = params
    return 4 * (1 + p.beta / p.b + p.a ** 2 / p.b) + 2 * (p.q + p.r)


def lipschitz_E_to_H(params: HRParameters, n1: float, n2: float, delta1: float, delta2: float) -> float:
    """C_E(M) bounding ||f(g) - f(h)||_H by ||g - h||_E on a set with L4/L6 bounds n1, n2."""
    for name, val in (("n1", n1), ("n2", n2), ("delta1", delta1), ("delta2", delta2)):
        if not val >= 0:
            raise ValidationError(f"{name} must be nonnegative, got {val}")
    p = params
    first = 4 * delta1 ** 2 * n1 ** 2 * (4 * p.a ** 2 + 2 * p.beta ** 2) + 128 * p.b ** 2 * delta2 ** 2 * n2 ** 4 + 2 * p.q ** 2
    return math.sqrt(max(first, 6.0, 4 + 2 * p.r ** 2))


def time_lipschitz_constant(params: HRParameters, G: float, c_E: float) -> float:
    """L(M) = (1 + C_E) G^2 + (J + alpha + q |c|)."""
    p = params
    return (1 + c_E) * G ** 2 + (p.J + p.alpha + p.q * abs(p.c))


def K(t, params: HRParameters):
    """Lipschitz constant e^{C_* t / 2} of S(t) on M."""
    return np.exp(coupled_constant(params) * np.asarray(t) / 2)


@dataclass(frozen=True)
class ModelConstants:
    c_star: float
    c_coupled: float
    c_E: float
    n1: float
    n2: float
    delta1: float
    delta2: float

    def to_dict(self) -> dict:
        return asdict(self)


def model_constants(params: HRParameters, n1: float, n2: float, delta1: float, delta2: float) -> ModelConstants:
    return ModelConstants(
        c_star=monotone_constant(params),
        c_coupled=coupled_constant(params),
        c_E=lipschitz_E_to_H(params, n1, n2, delta1, delta2),
        n1=float(n1),
        n2=float(n2),
        delta1=float(delta1),
        delta2=float(delta2),
    )


# ----------------------------------------------------------------------------
# ODE structure


def equilibria(params: HRParameters) -> np.ndarray:
    """All real equilibria of the ODE, Newton-polished; shape ``(k, 3)``.

    Setting v = alpha - beta u^2 and w = q (u - c) / r reduces the fixed
    point problem to a cubic in u.
    """
    p = params
    # -b u^3 + (a - beta) u^2 - (q / r) u + (alpha + J + q c / r) = 0
    coeffs = [-p.b, p.a - p.beta, -p.q / p.r, p.alpha + p.J + p.q * p.c / p.r]
    roots = np.roots(coeffs)
    out = []
    for z in roots:
        if abs(z.imag) > 1e-8 * max(1.0, abs(z.real)):
            continue
        u0 = z.real
        guess = [u0, p.alpha - p.beta * u0 ** 2, p.q * (u0 - p.c) / p.r]
        sol = optimize.fsolve(lambda y: ode_rhs(y, p), guess, xtol=1e-14, full_output=False)
        out.append(sol)
    return np.array(out).reshape(-1, 3)


def dissipation_threshold(params: HRParameters) -> float:
    """u0 with f1(u, 0, 0) * u < 0 whenever |u| > u0.

    For u < 0 every term of a u^2 - b u^3 + J is positive, so only the largest
    positive root of -b u^3 + a u^2 + J matters.
    """
    p = params
    roots = np.roots([-p.b, p.a, 0.0, p.J])
    real = [z.real for z in roots if abs(z.imag) < 1e-9 and z.real > 0]
    return float(max(real))
