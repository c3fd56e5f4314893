"""Neumann-Laplacian cosine basis on an interval or a rectangle.

Fields are stored as coefficient vectors against the L2-orthonormal
eigenfunctions

    e_k(x) = prod_i c(k_i) cos(k_i pi x_i / L_i),  c(0) = 1/sqrt(L_i), c(k) = sqrt(2/L_i)

with eigenvalues lambda_k = sum_i (k_i pi / L_i)^2, sorted nondecreasing with
ties broken by lexicographic multi-index.  The constant mode comes first, so
lambda_1 = 0.

Collocation uses the midpoint grid x_j = (j + 1/2) L / N of the DCT-II.  On that
grid cos(a pi x / L) and cos(b pi x / L) are discretely orthogonal whenever
a + b < 2N, so with N >= 2 K + 1 (K the largest retained index) the Galerkin
projection of a cubic of band-limited fields is computed without aliasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
from scipy import fft as sfft

from .errors import BasisError, ValidationError

NORM_KINDS = ("L2", "H1", "L4", "L6")
DENSE_LIMIT = 16384


@dataclass(frozen=True)
class DomainSpec:
    """Box domain prod_i [0, L_i] with a collocation grid."""

    lengths: tuple
    grid_points: tuple

    def __post_init__(self):
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        grid = tuple(int(n) for n in np.atleast_1d(self.grid_points))
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "grid_points", grid)
        if len(lengths) not in (1, 2):
            raise ValidationError(f"domain.lengths: dims must be 1 or 2, got {len(lengths)}")
        if len(grid) != len(lengths):
            raise ValidationError("domain.grid_points: need one entry per axis")
        for L in lengths:
            if not (math.isfinite(L) and L > 0):
                raise ValidationError(f"domain.lengths: must be positive and finite, got {L}")
        for n in grid:
            if n < 1:
                raise ValidationError(f"domain.grid_points: must be >= 1, got {n}")

    @property
    def dims(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @classmethod
    def for_modes(cls, lengths, m_max: int) -> "DomainSpec":
        """Dealiased grid for the first ``m_max`` modes, rounded up to a fast FFT length."""
        lengths = tuple(float(x) for x in np.atleast_1d(lengths))
        idx, _ = _sorted_modes(lengths, m_max)
        kmax = idx.max(axis=0)
        return cls(lengths, tuple(sfft.next_fast_len(int(2 * k + 1), real=True) for k in kmax))


def _sorted_modes(lengths, m_max):
    """First ``m_max`` multi-indices in (eigenvalue, lexicographic) order."""
    if m_max < 1:
        raise ValidationError(f"m_max must be >= 1, got {m_max}")
    for L in lengths:
        if not (math.isfinite(L) and L > 0):
            raise ValidationError(f"domain.lengths: must be positive and finite, got {L}")
    # Any of the first m_max modes has every index < m_max.
    axes = [np.arange(m_max) for _ in lengths]
    grids = np.meshgrid(*axes, indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    lam = sum((idx[:, i] * np.pi / L) ** 2 for i, L in enumerate(lengths))
    # rounding makes mirror-image ties (e.g. (0,1) vs (1,0)) compare equal
    lam_key = np.round(lam, 10)
    keys = [idx[:, i] for i in reversed(range(len(lengths)))] + [lam_key]
    order = np.lexsort(keys)[:m_max]
    return idx[order], lam[order]


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Sorted Neumann eigenpairs plus the collocation transforms."""

    domain: DomainSpec
    indices: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        self.indices.setflags(write=False)
        self.eigenvalues.setflags(write=False)

    @property
    def m_max(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def dims(self) -> int:
        return self.domain.dims

    @property
    def grid_shape(self) -> tuple:
        return self.domain.grid_points

    @cached_property
    def max_index(self) -> tuple:
        return tuple(int(k) for k in self.indices.max(axis=0))

    @cached_property
    def lp_grid_shape(self) -> tuple:
        # u^6 carries index 6K, exact on the midpoint grid once 6K < 2N
        return tuple(max(n, sfft.next_fast_len(3 * k + 1, real=True)) for n, k in zip(self.grid_shape, self.max_index))

    def nodes(self, shape=None) -> tuple:
        shape = self.grid_shape if shape is None else shape
        return tuple((np.arange(n) + 0.5) * L / n for n, L in zip(shape, self.domain.lengths))

    def quadrature_weight(self, shape=None) -> float:
        shape = self.grid_shape if shape is None else shape
        return self.domain.volume / float(np.prod(shape))

    @cached_property
    def _flat_cache(self) -> dict:
        return {}

    def _dense(self, shape):
        """(synthesis, analysis) matrices for small grids, where a matmul beats an FFT call."""
        key = ("dense", shape)
        cache = self._flat_cache
        if key not in cache:
            if self.m_max * int(np.prod(shape)) > DENSE_LIMIT:
                cache[key] = None
            else:
                E = self.mode_values(self.grid_points_flat(shape))
                cache[key] = (np.ascontiguousarray(E.T), self.quadrature_weight(shape) * E)
        return cache[key]

    def _flat(self, shape):
        cache = self._flat_cache
        if shape not in cache:
            cache[shape] = np.ravel_multi_index(tuple(self.indices.T), shape)
        return cache[shape]

    def to_grid(self, coeffs, shape=None) -> np.ndarray:
        """Evaluate coefficient arrays ``(..., m_max)`` on the grid ``(..., *shape)``."""
        shape = self.grid_shape if shape is None else tuple(shape)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.m_max:
            raise ValidationError(f"expected {self.m_max} coefficients, got {coeffs.shape[-1]}")
        lead = coeffs.shape[:-1]
        dense = self._dense(shape)
        if dense is not None:
            return (coeffs @ dense[0]).reshape(lead + shape)
        buf = np.zeros(lead + (int(np.prod(shape)),))
        buf[..., self._flat(shape)] = coeffs
        buf = buf.reshape(lead + shape)
        axes = tuple(range(-len(shape), 0))
        out = sfft.idctn(buf, type=2, norm="ortho", axes=axes)
        out *= math.sqrt(np.prod(shape) / self.domain.volume)
        return out

    def to_coeffs(self, values) -> np.ndarray:
        """Galerkin coefficients of grid samples ``(..., *grid_shape)``."""
        values = np.asarray(values, dtype=float)
        shape = self.grid_shape
        if values.shape[-self.dims:] != shape:
            raise ValidationError(f"grid values must end in shape {shape}, got {values.shape}")
        lead = values.shape[: values.ndim - self.dims]
        dense = self._dense(shape)
        if dense is not None:
            return values.reshape(lead + (-1,)) @ dense[1]
        axes = tuple(range(-self.dims, 0))
        spec = sfft.dctn(values, type=2, norm="ortho", axes=axes)
        spec = spec.reshape(lead + (-1,))
        out = spec[..., self._flat(shape)]
        out *= math.sqrt(self.domain.volume / np.prod(shape))
        return out

    def mode_values(self, points) -> np.ndarray:
        """Closed-form e_k at arbitrary points ``(n, dims)``; returns ``(n, m_max)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dims)
        out = np.ones((pts.shape[0], self.m_max))
        for i, L in enumerate(self.domain.lengths):
            k = self.indices[:, i]
            amp = np.where(k == 0, math.sqrt(1.0 / L), math.sqrt(2.0 / L))
            out *= amp * np.cos(np.outer(pts[:, i], k) * np.pi / L)
        return out

    def grid_points_flat(self, shape=None) -> np.ndarray:
        nodes = self.nodes(shape)
        mesh = np.meshgrid(*nodes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def gram(self) -> np.ndarray:
        """Gram matrix of the basis under the collocation quadrature."""
        E = self.mode_values(self.grid_points_flat())
        return self.quadrature_weight() * E.T @ E

    def l2(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        return np.sqrt(np.sum(c * c, axis=-1))

    def h1(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        return np.sqrt(np.sum((1.0 + self.eigenvalues) * c * c, axis=-1))

    def lp(self, coeffs, p: int, components: bool = False) -> np.ndarray:
        """L^p norm by exact quadrature; with ``components`` the axis -2 is the R^3 index."""
        vals = self.to_grid(coeffs, self.lp_grid_shape)
        axes = tuple(range(-self.dims, 0))
        if components:
            mag = np.sum(vals * vals, axis=-self.dims - 1)
            integrand = mag ** (p / 2)
        else:
            integrand = np.abs(vals) ** p
        total = self.quadrature_weight(self.lp_grid_shape) * np.sum(integrand, axis=axes)
        return total ** (1.0 / p)

    def embed(self, coeffs, other: "SpectralBasis") -> np.ndarray:
        """Copy coefficients into another basis on the same domain lengths."""
        if other.domain.lengths != self.domain.lengths:
            raise ValidationError("embed: domains differ")
        coeffs = np.asarray(coeffs, dtype=float)
        n = min(self.m_max, other.m_max)
        if not np.array_equal(self.indices[:n], other.indices[:n]):
            raise ValidationError("embed: mode orderings disagree")
        out = np.zeros(coeffs.shape[:-1] + (other.m_max,))
        out[..., :n] = coeffs[..., :n]
        return out


def build_basis(domain: DomainSpec, m_max: int) -> SpectralBasis:
    """Sorted Neumann eigenbasis with ``m_max`` modes on ``domain``."""
    m_max = int(m_max)
    capacity = int(np.prod([(n - 1) // 2 + 1 for n in domain.grid_points]))
    if m_max > capacity:
        raise BasisError(
            f"m_max={m_max} exceeds grid capacity {capacity} for grid_points="
            f"{domain.grid_points} (undersampled basis)"
        )
    idx, lam = _sorted_modes(domain.lengths, m_max)
    for axis, (k, n) in enumerate(zip(idx.max(axis=0), domain.grid_points)):
        if n < 2 * k + 1:
            raise BasisError(
                f"axis {axis}: mode index {k} needs grid_points >= {2 * k + 1}, got {n} "
                "(undersampled basis)"
            )
    return SpectralBasis(domain, idx.astype(np.int64), lam.astype(float))


@dataclass(frozen=True)
class ProjectionSpec:
    """Spectral cutoff: P_m keeps modes 1..m, Q_m = I - P_m."""

    m: int

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValidationError(f"projection rank m must be >= 1, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def rank_on_H(self) -> int:
        return 3 * self.m


@dataclass(frozen=True, eq=False)
class ScalarField:
    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.basis.m_max,):
            raise ValidationError(f"ScalarField needs {self.basis.m_max} coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("ScalarField coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True, eq=False)
class State:
    """Triple (u, v, w) on a shared basis, stored as a ``(3, m_max)`` array."""

    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (3, self.basis.m_max):
            raise ValidationError(f"State needs shape (3, {self.basis.m_max}), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_fields(cls, u: ScalarField, v: ScalarField, w: ScalarField) -> "State":
        if not (u.basis is v.basis is w.basis):
            raise ValidationError("all three fields must share one basis")
        return cls(u.basis, np.stack([u.coeffs, v.coeffs, w.coeffs]))

    @classmethod
    def constant(cls, basis: SpectralBasis, values) -> "State":
        c = np.zeros((3, basis.m_max))
        c[:, 0] = np.asarray(values, dtype=float) * math.sqrt(basis.domain.volume)
        return cls(basis, c)

    @classmethod
    def zeros(cls, basis: SpectralBasis) -> "State":
        return cls(basis, np.zeros((3, basis.m_max)))

    @property
    def u(self) -> ScalarField:
        return ScalarField(self.basis, self.coeffs[0])

    @property
    def v(self) -> ScalarField:
        return ScalarField(self.basis, self.coeffs[1])

    @property
    def w(self) -> ScalarField:
        return ScalarField(self.basis, self.coeffs[2])


Field = Union[ScalarField, State]


def _rank(spec) -> int:
    return spec.m if isinstance(spec, ProjectionSpec) else ProjectionSpec(int(spec)).m


def project(field: Field, spec, which: str = "low") -> Field:
    """P_m (``which='low'``) or Q_m (``which='high'``) applied componentwise."""
    m = _rank(spec)
    if m > field.basis.m_max:
        raise ValidationError(f"projection rank {m} exceeds basis size {field.basis.m_max}")
    c = np.array(field.coeffs)
    if which == "low":
        c[..., m:] = 0.0
    elif which == "high":
        c[..., :m] = 0.0
    else:
        raise ValidationError(f"which must be 'low' or 'high', got {which!r}")
    return type(field)(field.basis, c)


def split_norms(coeffs, m: int):
    """(||P_m xi||, ||Q_m xi||) in H for arrays ``(..., 3, m_max)``."""
    c = np.asarray(coeffs)
    low = np.sqrt(np.sum(c[..., :m] ** 2, axis=(-2, -1)))
    high = np.sqrt(np.sum(c[..., m:] ** 2, axis=(-2, -1)))
    return low, high


def to_grid(field: ScalarField) -> np.ndarray:
    return field.basis.to_grid(field.coeffs)


def to_coeffs(basis: SpectralBasis, values) -> ScalarField:
    values = np.asarray(values, dtype=float)
    if values.shape != basis.grid_shape:
        raise ValidationError(f"grid values must have shape {basis.grid_shape}, got {values.shape}")
    return ScalarField(basis, basis.to_coeffs(values))


def norm(field: Field, kind: str = "L2") -> float:
    """L2, H1, L4 or L6 norm of a scalar field or of a state in R^3."""
    if kind not in NORM_KINDS:
        raise ValidationError(f"norm kind must be one of {NORM_KINDS}, got {kind!r}")
    b = field.basis
    is_state = isinstance(field, State)
    if kind == "L2":
        val = b.l2(field.coeffs)
    elif kind == "H1":
        val = b.h1(field.coeffs)
    else:
        return float(b.lp(field.coeffs, int(kind[1]), components=is_state))
    if is_state:
        val = np.sqrt(np.sum(val ** 2))
    return float(val)


def state_norms(basis: SpectralBasis, coeffs, kind: str = "H1") -> np.ndarray:
    """Vectorised H or E norm of state arrays ``(..., 3, m_max)``."""
    per = basis.l2(coeffs) if kind == "L2" else basis.h1(coeffs)
    return np.sqrt(np.sum(per ** 2, axis=-1))
