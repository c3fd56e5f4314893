"""Monte-Carlo checks of the embedding and Lipschitz-type inequalities."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..model import HRParameters, lipschitz_E_to_H, monotone_constant, nonlinearity_coeffs
from ..spectral import SpectralBasis, state_norms
from .sampling import FIELD_FAMILIES, ensemble_lp_bounds, random_fields, random_states


@dataclass(frozen=True)
class EmbeddingEstimate:
    """Largest observed ||f||_{L4}/||f||_{H1} and ||f||_{L6}/||f||_{H1}."""

    delta1: float
    delta2: float
    samples: int
    families: tuple = FIELD_FAMILIES

    def to_dict(self) -> dict:
        return asdict(self)


def embedding_constants(basis: SpectralBasis, samples: int = 10_000, rng=None, families=FIELD_FAMILIES,
                        batch: int = 2048) -> EmbeddingEstimate:
    """Discrete L4/L6 embedding constants as max ratios over random fields."""
    rng = np.random.default_rng(0) if rng is None else rng
    d1 = d2 = 0.0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        c = random_fields(basis, n, rng, families)
        h1 = basis.h1(c)
        d1 = max(d1, float(np.max(basis.lp(c, 4) / h1)))
        d2 = max(d2, float(np.max(basis.lp(c, 6) / h1)))
        done += n
    return EmbeddingEstimate(d1, d2, int(samples), tuple(families))


@dataclass
class InequalityCheck:
    """Outcome of a sampled inequality lhs <= rhs (1 + rel_slack)."""

    name: str
    samples: int
    violations: int
    max_ratio: float
    constant: float
    rel_slack: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def _pairs(basis, n, rng, u_sup):
    """Half far-apart pairs, half close pairs where the Jacobian is what matters."""
    g = random_states(basis, n, rng, u_sup)
    h = random_states(basis, n, rng, u_sup)
    near = np.arange(n) % 2 == 1
    eps = 10.0 ** rng.uniform(-6, -1, size=int(near.sum()))
    h[near] = g[near] + eps[:, None, None] * random_states(basis, int(near.sum()), rng, 1.0)
    return g, h


def monotonicity_check(basis: SpectralBasis, params: HRParameters, g=None, h=None, n: int = 10_000,
                       rng=None, u_sup: float = 10.0, rel_slack: float = 1e-9) -> InequalityCheck:
    """<f(g) - f(h), g - h> <= C* ||g - h||^2 over sampled pairs."""
    rng = np.random.default_rng(1) if rng is None else rng
    if g is None:
        g, h = _pairs(basis, n, rng, u_sup)
    c_star = monotone_constant(params)
    xi = g - h
    df = nonlinearity_coeffs(basis, g, params) - nonlinearity_coeffs(basis, h, params)
    lhs = np.sum(df * xi, axis=(-2, -1))
    rhs = c_star * np.sum(xi * xi, axis=(-2, -1))
    bad = lhs > rhs * (1 + rel_slack) + 1e-300
    nz = rhs > 0
    ratio = float(np.max(lhs[nz] / rhs[nz])) if np.any(nz) else 0.0
    # ratio is lhs / (C* ||xi||^2); the raw quotient lhs / ||xi||^2 goes in details
    return InequalityCheck("monotonicity", int(len(lhs)), int(np.sum(bad)), ratio, c_star, rel_slack,
                           {"max_lhs_over_norm2": ratio * c_star})


def lipschitz_check(basis: SpectralBasis, params: HRParameters, g=None, h=None, n: int = 10_000, rng=None,
                    u_sup: float = 10.0, embedding: EmbeddingEstimate | None = None,
                    rel_slack: float = 1e-9) -> InequalityCheck:
    """||f(g) - f(h)||_H <= C_E ||g - h||_E with N1, N2 measured on the same ensemble."""
    rng = np.random.default_rng(2) if rng is None else rng
    if g is None:
        g, h = _pairs(basis, n, rng, u_sup)
    if embedding is None:
        embedding = embedding_constants(basis, rng=rng)
    n1, n2 = ensemble_lp_bounds(basis, np.concatenate([g, h]))
    c_E = lipschitz_E_to_H(params, n1, n2, embedding.delta1, embedding.delta2)
    xi = g - h
    df = nonlinearity_coeffs(basis, g, params) - nonlinearity_coeffs(basis, h, params)
    lhs = np.sqrt(np.sum(df * df, axis=(-2, -1)))
    rhs = c_E * state_norms(basis, xi, "H1")
    bad = lhs > rhs * (1 + rel_slack)
    nz = rhs > 0
    ratio = float(np.max(lhs[nz] / rhs[nz])) if np.any(nz) else 0.0
    details = {"n1": n1, "n2": n2, "delta1": embedding.delta1, "delta2": embedding.delta2,
               "embedding_samples": embedding.samples}
    return InequalityCheck("lipschitz_E_to_H", int(len(lhs)), int(np.sum(bad)), ratio, c_E, rel_slack, details)
