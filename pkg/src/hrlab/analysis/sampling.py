"""Random band-limited fields, states and trajectory pairs."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..spectral import SpectralBasis, state_norms

FIELD_FAMILIES = ("power", "bump", "constant", "single")


def _power_field(basis, rng):
    m = basis.m_max
    n_active = int(rng.integers(1, m + 1))
    s = rng.uniform(0.0, 3.0)
    c = np.zeros(m)
    c[:n_active] = rng.standard_normal(n_active) * (1.0 + basis.eigenvalues[:n_active]) ** (-s / 2)
    return c


def _bump_field(basis, rng):
    nodes = basis.nodes()
    mesh = np.meshgrid(*nodes, indexing="ij")
    vals = np.ones(basis.grid_shape)
    for x, L in zip(mesh, basis.domain.lengths):
        x0 = rng.uniform(0, L)
        width = L * rng.uniform(0.05, 1.0)
        vals = vals * np.exp(-((x - x0) ** 2) / (2 * width ** 2))
    return basis.to_coeffs(vals + rng.uniform(-1, 1) * rng.integers(0, 2))


def _constant_field(basis, rng):
    c = np.zeros(basis.m_max)
    c[0] = 1.0
    return c


def _single_field(basis, rng):
    c = np.zeros(basis.m_max)
    c[int(rng.integers(0, basis.m_max))] = 1.0
    return c


_FAMILY_FN = {"power": _power_field, "bump": _bump_field, "constant": _constant_field, "single": _single_field}


def random_fields(basis: SpectralBasis, n: int, rng: np.random.Generator, families=FIELD_FAMILIES) -> np.ndarray:
    """``n`` nonzero band-limited scalar fields ``(n, m_max)`` cycling through ``families``."""
    for f in families:
        if f not in _FAMILY_FN:
            raise ValidationError(f"unknown field family {f!r}; known: {FIELD_FAMILIES}")
    out = np.empty((n, basis.m_max))
    for i in range(n):
        fam = families[i % len(families)]
        c = _FAMILY_FN[fam](basis, rng)
        while not np.any(c):
            c = _power_field(basis, rng)
        out[i] = c * rng.choice([-1.0, 1.0]) * np.exp(rng.uniform(-2, 2))
    return out


def sup_norm(basis: SpectralBasis, coeffs) -> np.ndarray:
    """Max |value| on the fine collocation grid (a lower bound for the true sup)."""
    vals = basis.to_grid(coeffs, basis.lp_grid_shape)
    return np.max(np.abs(vals), axis=tuple(range(-basis.dims, 0)))


def random_states(basis: SpectralBasis, n: int, rng: np.random.Generator, u_sup: float = 10.0) -> np.ndarray:
    """States ``(n, 3, m_max)`` with ``max |u| <= u_sup`` on the fine grid.

    v and w are drawn from the same field families with amplitudes up to
    ``u_sup`` so all three components participate.
    """
    fields = random_fields(basis, 3 * n, rng).reshape(n, 3, basis.m_max)
    sup = sup_norm(basis, fields)
    scale = u_sup * rng.uniform(0.0, 1.0, size=(n, 3)) / np.maximum(sup, 1e-300)
    return fields * scale[..., None]


def random_states_with_norm(basis: SpectralBasis, norms, rng: np.random.Generator, n_active: int | None = None) -> np.ndarray:
    """States with prescribed E-norms; mass split across components by a Dirichlet draw."""
    norms = np.asarray(norms, dtype=float)
    m = basis.m_max if n_active is None else min(int(n_active), basis.m_max)
    out = np.zeros((norms.size, 3, basis.m_max))
    for i, target in enumerate(norms):
        if target == 0:
            continue
        shares = rng.dirichlet(np.ones(3))
        for comp in range(3):
            c = rng.standard_normal(m) * (1.0 + basis.eigenvalues[:m]) ** -1.0
            e = np.sqrt(np.sum((1.0 + basis.eigenvalues[:m]) * c * c))
            out[i, comp, :m] = c * np.sqrt(shares[comp]) / e
        out[i] *= target
    return out


def mode_vector(basis: SpectralBasis, k: int, component: int | None = None) -> np.ndarray:
    """Unit state along mode ``k`` (0-based); all three components unless one is named."""
    if not 0 <= k < basis.m_max:
        raise ValidationError(f"mode {k} outside basis of size {basis.m_max}")
    v = np.zeros((3, basis.m_max))
    if component is None:
        v[:, k] = 1.0 / np.sqrt(3.0)
    else:
        v[component, k] = 1.0
    return v


PAIR_KINDS = ("distinct", "low", "high")


def make_pairs(basis: SpectralBasis, samples: np.ndarray, n_pairs: int, m: int, rng: np.random.Generator,
               eps: float = 1e-4, kinds=PAIR_KINDS):
    """Trajectory pairs drawn from a sample of states.

    ``distinct`` pairs two sample states, ``low`` perturbs a state inside the
    first ``m`` modes and ``high`` perturbs it along a single mode above ``m``.
    Returns ``(g0, h0, kinds)``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[1:] != (3, basis.m_max):
        raise ValidationError(f"samples must have shape (n, 3, {basis.m_max}), got {samples.shape}")
    if "high" in kinds and m >= basis.m_max:
        raise ValidationError(f"high-mode pairs need m < m_max ({m} >= {basis.m_max}); increase m_max")
    g0 = np.empty((n_pairs, 3, basis.m_max))
    h0 = np.empty_like(g0)
    labels = []
    n_s = samples.shape[0]
    for i in range(n_pairs):
        kind = kinds[i % len(kinds)]
        j = int(rng.integers(n_s))
        g = samples[j]
        if kind == "distinct" and n_s > 1:
            k = int(rng.integers(n_s - 1))
            h = samples[k + (k >= j)]
        elif kind == "high":
            K = int(rng.integers(m, basis.m_max))
            h = g + eps * mode_vector(basis, K, int(rng.integers(3)))
        else:
            kind = "low"
            d = np.zeros((3, basis.m_max))
            d[:, :m] = rng.standard_normal((3, m))
            h = g + eps * d / np.sqrt(np.sum(d * d))
        g0[i], h0[i] = g, h
        labels.append(kind)
    return g0, h0, labels


def ensemble_lp_bounds(basis: SpectralBasis, states) -> tuple:
    """(N1, N2) = max ||u||_{L4}, max ||u||_{L6} over states ``(..., 3, m)``."""
    u = np.asarray(states)[..., 0, :].reshape(-1, basis.m_max)
    return float(np.max(basis.lp(u, 4))), float(np.max(basis.lp(u, 6)))


def ensemble_G(basis: SpectralBasis, states) -> float:
    """max ||g||_E over the supplied states."""
    return float(np.max(state_norms(basis, states, "H1")))
