import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from hrlab import (
    BlowUpError,
    DomainSpec,
    HRParameters,
    State,
    StepperConfig,
    ValidationError,
    build_basis,
    evolve,
    evolve_batch,
    evolve_pair,
    monotone_constant,
    ode_rhs,
    ode_rk4,
    step,
)
from hrlab.integrator import pair_observer, phi1, phi2, record_times
from hrlab.spectral import split_norms

ZERO = lambda basis, c: np.zeros_like(c)


@pytest.fixture(scope="module")
def smooth_state(basis_1d):
    rng = np.random.default_rng(7)
    c = np.zeros((3, basis_1d.m_max))
    c[:, :6] = 0.5 * rng.standard_normal((3, 6))
    return State(basis_1d, c)


def test_phi_functions():
    z = np.array([0.0, -1e-8, -1e-4, -0.5, -30.0])
    np.testing.assert_allclose(phi1(z)[1:], np.expm1(z[1:]) / z[1:], rtol=1e-14)
    assert phi1(z)[0] == 1.0 and phi2(z)[0] == 0.5
    big = z[3:]
    np.testing.assert_allclose(phi2(big), (np.expm1(big) - big) / big ** 2, rtol=1e-14)
    # series branch agrees with the closed form where both are accurate
    assert phi2(np.array([-9.9e-4]))[0] == pytest.approx((math.expm1(-9.9e-4) + 9.9e-4) / 9.9e-4 ** 2, rel=1e-9)


def test_config_validation():
    with pytest.raises(ValidationError, match="dt"):
        StepperConfig(dt=0.0)
    with pytest.raises(ValidationError, match="scheme"):
        StepperConfig(scheme="euler")
    with pytest.raises(ValidationError, match="record_every"):
        StepperConfig(record_every=0)


@pytest.mark.parametrize("scheme", ["exponential-euler", "etd-rk2"])
def test_pure_decay_is_exact(scheme, basis_1d):
    c = np.zeros((3, basis_1d.m_max))
    c[:, 1] = [1.0, 2.0, -3.0]   # lambda = 1 on [0, pi]
    out = step(State(basis_1d, c), HRParameters(), StepperConfig(dt=0.5, scheme=scheme), nonlinearity=ZERO)
    np.testing.assert_allclose(out.coeffs[:, 1], c[:, 1] * math.exp(-0.5), rtol=1e-15)


def test_pure_decay_rk4(basis_1d):
    c = np.zeros((3, basis_1d.m_max))
    c[0, 1] = 1.0
    out = step(State(basis_1d, c), HRParameters(), StepperConfig(dt=0.5, scheme="reference-rk4"), nonlinearity=ZERO)
    assert out.coeffs[0, 1] == pytest.approx(math.exp(-0.5), rel=1e-10)   # RK4 truncation ~ h^4


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 3.0))
def test_linear_flow_contracts(seed, t):
    basis = build_basis(DomainSpec.for_modes((math.pi,), 8), 8)
    rng = np.random.default_rng(seed)
    g = State(basis, rng.standard_normal((3, 8)))
    params = HRParameters(d1=0.3, d2=1.0, d3=2.0)
    cfg = StepperConfig(dt=t / 10, record_every=1)
    tr = evolve(g, params, t, cfg, nonlinearity=ZERO)
    assert np.all(np.diff(tr.norm_H) <= 1e-15)
    assert np.all(np.diff(tr.norm_E) <= 1e-15)


def test_semigroup(smooth_state, params):
    cfg = StepperConfig(dt=1e-3, record_every=100)
    whole = evolve(smooth_state, params, 0.5, cfg).states[-1]
    half = evolve(smooth_state, params, 0.2, cfg)
    rest = evolve(half.state(-1), params, 0.3, cfg).states[-1]
    assert np.max(np.abs(whole - rest)) < 1e-9


def test_record_times_and_shapes(smooth_state, params):
    tr = evolve(smooth_state, params, 0.1, StepperConfig(dt=1e-3, record_every=30))
    np.testing.assert_allclose(tr.times, [0, 0.03, 0.06, 0.09, 0.1])
    assert np.all(np.diff(tr.times) > 0)
    assert tr.states.shape == (5, 3, 16) and tr.norms.shape == (5, 3, 2)
    np.testing.assert_array_equal(record_times(100, StepperConfig(dt=1e-3, record_every=30)), tr.times)
    with pytest.raises(ValidationError):
        evolve(smooth_state, params, 0.1005, StepperConfig(dt=1e-3))


def test_determinism(smooth_state, params):
    cfg = StepperConfig(dt=1e-3, record_every=50)
    a = evolve(smooth_state, params, 0.3, cfg)
    b = evolve(smooth_state, params, 0.3, cfg)
    assert a.states.tobytes() == b.states.tobytes()


def test_schemes_agree_as_dt_shrinks(smooth_state, params):
    cfg = dict(record_every=10 ** 6)
    etd = evolve(smooth_state, params, 1.0, StepperConfig(dt=1e-4, **cfg)).states[-1]
    rk4 = evolve(smooth_state, params, 1.0, StepperConfig(dt=1e-2, scheme="reference-rk4", **cfg)).states[-1]
    assert np.max(np.abs(etd - rk4)) < 1e-5
    # first-order scheme: halving dt roughly halves the gap
    ee = [evolve(smooth_state, params, 1.0, StepperConfig(dt=dt, scheme="exponential-euler", **cfg)).states[-1]
          for dt in (4e-4, 2e-4)]
    e1, e2 = (np.max(np.abs(x - rk4)) for x in ee)
    assert 1.8 < e1 / e2 < 2.2


def test_constant_state_follows_ode(basis_1d, params):
    y0 = [0.2, -1.0, 0.5]
    s = State.constant(basis_1d, y0)
    tr = evolve(s, params, 5.0, StepperConfig(dt=0.05, scheme="reference-rk4", record_every=2))
    t, ys = ode_rk4(y0, params, 5.0, dt=5e-4, record_every=200)
    np.testing.assert_allclose(tr.times, t)
    pde = tr.states[:, :, 0] / math.sqrt(basis_1d.domain.volume)
    assert np.max(np.abs(pde - ys)) < 1e-8
    assert np.max(np.abs(tr.states[:, :, 1:])) < 1e-12


def test_ode_rk4_against_dop853(params):
    t, ys = ode_rk4([0, 0, 0], params, 20.0, dt=1e-3, record_every=1000)
    ref = solve_ivp(lambda _, y: ode_rhs(y, params), (0, 20), [0, 0, 0], method="DOP853",
                    t_eval=t, rtol=1e-12, atol=1e-12)
    assert np.max(np.abs(ref.y.T - ys)) < 1e-8


def test_ode_bursts_qualitatively(params):
    # spikes above u = 1 arrive in clusters separated by long quiet gaps
    t, ys = ode_rk4([0, 0, 0], params, 1000.0, dt=1e-2, record_every=1)
    u = ys[:, 0]
    up = np.flatnonzero((u[1:] >= 1.0) & (u[:-1] < 1.0))
    isi = np.diff(t[up])
    assert len(up) > 20
    assert isi.max() > 5 * np.median(isi)


def test_energy_stays_bounded(smooth_state, params):
    tr = evolve(smooth_state, params, 500.0, StepperConfig(dt=1e-2, record_every=100))
    assert np.all(np.isfinite(tr.norm_E))
    late = tr.norm_E[tr.times >= 250]
    assert late.max() < 50 and late.max() <= 1.5 * tr.norm_E[(tr.times >= 100) & (tr.times < 250)].max()


def test_blowup_raises_with_time(basis_1d, params):
    c = np.zeros((3, basis_1d.m_max))
    c[0, :4] = 30.0
    with pytest.raises(BlowUpError) as info:
        evolve(State(basis_1d, c), params, 5.0, StepperConfig(dt=1.0))
    assert info.value.last_time is not None and info.value.last_time >= 0
    tr = evolve(State(basis_1d, c), params, 5.0, StepperConfig(dt=1.0), allow_blowup=True)
    assert tr.blew_up and np.all(np.isfinite(tr.states))


# --- batches and pairs ---------------------------------------------------------


def _batch(basis, n, seed=3):
    rng = np.random.default_rng(seed)
    c = np.zeros((n, 3, basis.m_max))
    c[..., :5] = 0.5 * rng.standard_normal((n, 3, 5))
    return c


def test_batch_matches_single_runs(basis_1d, params):
    c = _batch(basis_1d, 3)
    cfg = StepperConfig(dt=1e-3, record_every=20)
    run = evolve_batch(basis_1d, c, params, 0.1, cfg, keep_states=True)
    for i in range(3):
        single = evolve(State(basis_1d, c[i]), params, 0.1, cfg)
        # batched matmuls may round differently in the last bit
        np.testing.assert_allclose(run.states[:, i], single.states, rtol=0, atol=1e-13)


def test_thread_count_does_not_change_results(basis_1d, params, monkeypatch):
    c = _batch(basis_1d, 70)
    cfg = StepperConfig(dt=1e-3, record_every=25)
    out = []
    for threads in ("1", "4"):
        monkeypatch.setenv("HRLAB_THREADS", threads)
        out.append(evolve_batch(basis_1d, c, params, 0.05, cfg).observed)
    assert out[0].tobytes() == out[1].tobytes()


def test_grouped_pair_observer_sees_matching_pairs(basis_1d, params):
    n = 40   # more pairs than one chunk holds
    g, h = _batch(basis_1d, n, 1), _batch(basis_1d, n, 2)
    cfg = StepperConfig(dt=1e-3, record_every=25)
    run = evolve_batch(basis_1d, np.concatenate([g, h]), params, 0.05, cfg,
                       observe=pair_observer(basis_1d, (4,)), keep_states=True, groups=2)
    xi = run.states[:, :n] - run.states[:, n:]
    np.testing.assert_allclose(run.observed[..., 0], np.sqrt(np.sum(xi ** 2, axis=(-2, -1))), rtol=1e-14)
    lo, hi = split_norms(xi, 4)
    np.testing.assert_allclose(run.observed[..., 1], lo, rtol=1e-14)
    np.testing.assert_allclose(run.observed[..., 2], hi, rtol=1e-14)
    plain = evolve_batch(basis_1d, np.concatenate([g, h]), params, 0.05, cfg, keep_states=True)
    np.testing.assert_array_equal(plain.states, run.states)


def test_batch_validation(basis_1d, params):
    cfg = StepperConfig()
    with pytest.raises(ValidationError):
        evolve_batch(basis_1d, np.zeros((2, 3, 5)), params, 0.01, cfg)
    with pytest.raises(ValidationError):
        evolve_batch(basis_1d, np.zeros((3, 3, 16)), params, 0.01, cfg, groups=2)
    bad = np.zeros((1, 3, 16))
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValidationError):
        evolve_batch(basis_1d, bad, params, 0.01, cfg)


def test_identical_pair_has_zero_difference(smooth_state, params):
    run = evolve_pair(smooth_state, smooth_state, params, 0.2, StepperConfig(record_every=20), projections=(3,))
    assert not np.any(run.diff) and not np.any(run.low[3]) and not np.any(run.high[3])


def test_pair_difference_obeys_gronwall_and_K(smooth_state, params):
    rng = np.random.default_rng(11)
    h = State(smooth_state.basis, smooth_state.coeffs + 1e-3 * rng.standard_normal((3, 16)))
    run = evolve_pair(smooth_state, h, params, 1.0, StepperConfig(record_every=20), projections=(4,))
    ratio = run.diff / run.diff[0]
    assert np.all(ratio <= np.exp(monotone_constant(params) * run.times) * (1 + 1e-6))
    assert np.all(ratio <= np.exp(60.021 * run.times / 2) * (1 + 1e-6))
    np.testing.assert_allclose(run.low[4] ** 2 + run.high[4] ** 2, run.diff ** 2, rtol=1e-12)
    with pytest.raises(ValidationError):
        other = build_basis(DomainSpec.for_modes((1.0,), 16), 16)
        evolve_pair(smooth_state, State(other, h.coeffs), params, 0.1, StepperConfig())
