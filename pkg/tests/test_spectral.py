import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from hrlab import BasisError, DomainSpec, ProjectionSpec, ScalarField, State, ValidationError, build_basis, norm, project
from hrlab.spectral import split_norms, state_norms, to_coeffs, to_grid

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def basis_for(lengths, m):
    return build_basis(DomainSpec.for_modes(lengths, m), m)


# --- eigenvalues -----------------------------------------------------------


def test_1d_pi_spectrum():
    b = basis_for((math.pi,), 4)
    np.testing.assert_allclose(b.eigenvalues, [0, 1, 4, 9], atol=1e-14)


def test_1d_unit_interval_spectrum():
    b = basis_for((1.0,), 3)
    np.testing.assert_allclose(b.eigenvalues, [0, math.pi ** 2, 4 * math.pi ** 2], rtol=1e-14)


def test_2d_tie_order_is_lexicographic():
    b = basis_for((math.pi, math.pi), 4)
    np.testing.assert_allclose(b.eigenvalues, [0, 1, 1, 2], atol=1e-14)
    assert b.indices.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_2d_eigenvalues_match_enumeration():
    L = (math.pi, 2.0)
    b = basis_for(L, 20)
    brute = sorted((kx * math.pi / L[0]) ** 2 + (ky * math.pi / L[1]) ** 2 for kx in range(20) for ky in range(20))
    np.testing.assert_allclose(b.eigenvalues, brute[:20], rtol=1e-12)
    assert np.all(np.diff(b.eigenvalues) >= 0)
    assert b.eigenvalues[0] == 0


@pytest.mark.parametrize("lengths", [(math.pi,), (1.0,), (math.pi, math.pi), (math.pi, 2.0)])
def test_gram_is_identity(lengths):
    b = basis_for(lengths, 12)
    np.testing.assert_allclose(b.gram(), np.eye(12), atol=1e-10)


def test_closed_form_eigenfunctions_1d():
    L = 2.5
    b = basis_for((L,), 5)
    x = np.linspace(0, L, 7)[:, None]
    E = b.mode_values(x)
    np.testing.assert_allclose(E[:, 0], 1 / math.sqrt(L))
    np.testing.assert_allclose(E[:, 2], math.sqrt(2 / L) * np.cos(2 * math.pi * x[:, 0] / L))


def test_rejects_bad_domains():
    with pytest.raises(ValidationError):
        DomainSpec((0.0,), (4,))
    with pytest.raises(ValidationError):
        DomainSpec((-1.0,), (4,))
    with pytest.raises(ValidationError):
        DomainSpec((1.0, 1.0, 1.0), (4, 4, 4))


def test_rejects_undersampled_basis():
    with pytest.raises(BasisError):
        build_basis(DomainSpec((math.pi,), (8,)), 6)   # capacity (8 - 1)//2 + 1 = 4
    with pytest.raises(BasisError):
        build_basis(DomainSpec((math.pi,), (9,)), 6)   # index 5 needs 11 points


# --- transforms --------------------------------------------------------------


def test_constant_field_transforms(basis_2d):
    c = 1.7
    vals = np.full(basis_2d.grid_shape, c)
    coeffs = basis_2d.to_coeffs(vals)
    expected = np.zeros(basis_2d.m_max)
    expected[0] = c * math.sqrt(basis_2d.domain.volume)
    np.testing.assert_allclose(coeffs, expected, atol=1e-12)
    np.testing.assert_allclose(basis_2d.to_grid(expected), vals, rtol=1e-12)


def test_single_mode_transform(basis_1d):
    vals = basis_1d.mode_values(basis_1d.grid_points_flat())[:, 1]
    f = to_coeffs(basis_1d, vals)
    expected = np.zeros(basis_1d.m_max)
    expected[1] = 1.0
    np.testing.assert_allclose(f.coeffs, expected, atol=1e-12)


@given(arrays(float, 16, elements=finite))
def test_roundtrip_1d(c):
    b = basis_for((math.pi,), 16)
    back = b.to_coeffs(b.to_grid(c))
    assert np.max(np.abs(back - c)) <= 1e-10 * max(1.0, np.max(np.abs(c)))


def test_roundtrip_2d_both_paths(rng):
    # the large basis exercises the FFT path, the small one the dense path
    for m in (12, 200):
        b = basis_for((math.pi, 2.0), m)
        c = rng.standard_normal((5, m))
        np.testing.assert_allclose(b.to_coeffs(b.to_grid(c)), c, atol=1e-10)


def test_dense_and_fft_paths_agree(rng):
    from hrlab import spectral

    b = basis_for((math.pi,), 24)
    c = rng.standard_normal((3, 24))
    dense = b.to_grid(c)
    old = spectral.DENSE_LIMIT
    try:
        spectral.DENSE_LIMIT = 0
        b2 = basis_for((math.pi,), 24)
        fft = b2.to_grid(c)
        np.testing.assert_allclose(b2.to_coeffs(fft), c, atol=1e-12)
    finally:
        spectral.DENSE_LIMIT = old
    np.testing.assert_allclose(dense, fft, atol=1e-12)


def test_to_grid_matches_closed_form(basis_2d, rng):
    c = rng.standard_normal(basis_2d.m_max)
    direct = basis_2d.mode_values(basis_2d.grid_points_flat()) @ c
    np.testing.assert_allclose(to_grid(ScalarField(basis_2d, c)).ravel(), direct, atol=1e-12)


def test_size_mismatch_rejected(basis_1d):
    with pytest.raises(ValidationError):
        to_coeffs(basis_1d, np.zeros(basis_1d.grid_shape[0] + 1))
    with pytest.raises(ValidationError):
        basis_1d.to_grid(np.zeros(basis_1d.m_max + 1))


# --- norms -------------------------------------------------------------------


def test_constant_mode_norms(basis_1d):
    f = ScalarField(basis_1d, np.eye(basis_1d.m_max)[0])
    assert norm(f, "L2") == pytest.approx(1.0)
    assert norm(f, "H1") == pytest.approx(1.0)


def test_second_mode_h1(basis_1d):
    f = ScalarField(basis_1d, np.eye(basis_1d.m_max)[1])
    assert norm(f, "H1") == pytest.approx(math.sqrt(2.0), rel=1e-14)


def test_cos_l4_norm_against_quadrature(basis_1d):
    # cos(x) = sqrt(pi/2) e_2 on [0, pi]
    c = np.zeros(basis_1d.m_max)
    c[1] = math.sqrt(math.pi / 2)
    oracle = integrate.quad(lambda x: math.cos(x) ** 4, 0, math.pi)[0] ** 0.25
    assert oracle == pytest.approx((3 * math.pi / 8) ** 0.25, rel=1e-12)
    assert norm(ScalarField(basis_1d, c), "L4") == pytest.approx(oracle, rel=1e-12)
    # the closed form is 1.04183; a rounded 1.0423 is only good to 5e-4
    assert oracle == pytest.approx(1.0423, abs=5e-4)


def test_l6_norm_against_quadrature(basis_2d, rng):
    c = np.zeros(basis_2d.m_max)
    c[:5] = rng.standard_normal(5)
    f = lambda y, x: float((basis_2d.mode_values(np.array([[x, y]])) @ c)[0]) ** 6
    oracle = integrate.dblquad(f, 0, math.pi, 0, 2.0, epsabs=1e-11, epsrel=1e-11)[0] ** (1 / 6)
    assert norm(ScalarField(basis_2d, c), "L6") == pytest.approx(oracle, rel=1e-8)


def test_state_norms_combine_components(basis_1d, rng):
    s = State(basis_1d, rng.standard_normal((3, basis_1d.m_max)))
    per = [norm(f, "H1") for f in (s.u, s.v, s.w)]
    assert norm(s, "H1") == pytest.approx(math.sqrt(sum(p * p for p in per)))
    assert state_norms(basis_1d, s.coeffs) == pytest.approx(norm(s, "H1"))
    ptwise = np.sqrt(np.sum(basis_1d.to_grid(s.coeffs, basis_1d.lp_grid_shape) ** 2, axis=0))
    oracle = (np.sum(ptwise ** 4) * basis_1d.quadrature_weight(basis_1d.lp_grid_shape)) ** 0.25
    assert norm(s, "L4") == pytest.approx(oracle, rel=1e-12)


def test_unknown_norm_kind(basis_1d):
    with pytest.raises(ValidationError):
        norm(ScalarField(basis_1d, np.zeros(basis_1d.m_max)), "L3")


@given(arrays(float, 16, elements=finite), st.integers(1, 15))
def test_mode_norm_inequalities(c, m):
    b = basis_for((math.pi,), 16)
    p = ScalarField(b, np.where(np.arange(16) < m, c, 0.0))
    q = ScalarField(b, np.where(np.arange(16) >= m, c, 0.0))
    lam = b.eigenvalues
    assert norm(p, "H1") <= (math.sqrt(lam[m - 1]) + 1) * norm(p, "L2") * (1 + 1e-12) + 1e-300
    grad_q = math.sqrt(max(norm(q, "H1") ** 2 - norm(q, "L2") ** 2, 0.0))
    assert norm(q, "L2") * math.sqrt(lam[m]) <= grad_q * (1 + 1e-12) + 1e-12


# --- projections -------------------------------------------------------------


def test_projection_example(basis_1d):
    b = basis_for((math.pi,), 4)
    f = ScalarField(b, np.ones(4))
    assert project(f, ProjectionSpec(2), "low").coeffs.tolist() == [1, 1, 0, 0]
    assert project(f, 2, "high").coeffs.tolist() == [0, 0, 1, 1]


def test_full_rank_projection_is_identity(basis_1d, rng):
    f = ScalarField(basis_1d, rng.standard_normal(basis_1d.m_max))
    np.testing.assert_array_equal(project(f, basis_1d.m_max).coeffs, f.coeffs)


@given(arrays(float, (3, 16), elements=finite), st.integers(1, 16))
def test_projection_algebra(c, m):
    b = basis_for((math.pi,), 16)
    s = State(b, c)
    P, Q = project(s, m, "low"), project(s, m, "high")
    np.testing.assert_array_equal(P.coeffs + Q.coeffs, s.coeffs)
    np.testing.assert_array_equal(project(P, m).coeffs, P.coeffs)
    assert not np.any(project(Q, m, "low").coeffs)
    lo, hi = split_norms(c, m)
    total = norm(s, "L2") ** 2
    assert lo ** 2 + hi ** 2 == pytest.approx(total, rel=1e-12, abs=1e-300)


def test_projection_rank_on_H():
    assert ProjectionSpec(5).rank_on_H == 15
    with pytest.raises(ValidationError):
        ProjectionSpec(0)


def test_projection_beyond_basis(basis_1d):
    with pytest.raises(ValidationError):
        project(ScalarField(basis_1d, np.zeros(16)), 17)


def test_state_invariants(basis_1d, basis_2d):
    with pytest.raises(ValidationError):
        State(basis_1d, np.zeros((2, 16)))
    u = ScalarField(basis_1d, np.zeros(16))
    with pytest.raises(ValidationError):
        State.from_fields(u, u, ScalarField(basis_2d, np.zeros(12)))
    with pytest.raises(ValidationError):
        ScalarField(basis_1d, np.full(16, np.nan))


def test_basis_is_immutable(basis_1d):
    with pytest.raises(ValueError):
        basis_1d.eigenvalues[0] = 1.0


def test_embed_preserves_coefficients(rng):
    small, big = basis_for((math.pi,), 8), basis_for((math.pi,), 20)
    c = rng.standard_normal((2, 3, 8))
    e = small.embed(c, big)
    np.testing.assert_array_equal(e[..., :8], c)
    assert not np.any(e[..., 8:])
    with pytest.raises(ValidationError):
        small.embed(c, basis_for((1.0,), 20))
