import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures_closed_form import (
    free_particle_g,
    free_particle_h,
    free_particle_z,
    harmonic_h,
    harmonic_psi,
    plasma_gauge_rate,
    plasma_painleve_phase_corrected,
    plasma_painleve_phase_single_power,
    plasma_z,
)
from soliton_forge.assembler import (
    assemble,
    autonomous_residual,
    classical_trajectory,
    evaluate_psi,
    forcing_gauge_phase,
    make_balance_laws,
    phase_S,
    to_autonomous,
)
from soliton_forge.characteristic import fiber_optic, free_particle, harmonic_trap, plasma_linear
from soliton_forge.errors import (
    DomainError,
    FocalPointError,
    TrajectoryError,
    UnsupportedRegimeError,
)
from soliton_forge.kernels import PhaseState
from soliton_forge.profile import build_profile_m0, build_profile_m1, profile_eval

BRIGHT = build_profile_m0(1.0, -2.0, 0.0)
DARK = build_profile_m0(-2.0, 1.0, 2.0)
AIRY = build_profile_m1(1.0, 2.0, 0.5)
X = np.linspace(-6.0, 6.0, 41)
T = np.linspace(0.05, 1.0, 12)


def _F(p):
    return lambda z: profile_eval(p, z)[0]


@settings(max_examples=15)
@given(st.floats(-0.2, 0.2), st.floats(0.5, 1.5), st.floats(-0.5, 0.5), st.floats(-1.0, 1.0))
def test_harmonic_field_matches_closed_form(a0, b0, g0c, y):
    init = PhaseState.initial(mu=1.0, alpha=a0, beta=b0, gamma=g0c)
    sol = assemble(harmonic_trap(), init, BRIGHT, 1.0, y=y)
    psi = evaluate_psi(sol, X[None, :], T[:, None])
    ref = harmonic_psi(X[None, :], y, T[:, None], _F(BRIGHT), 1.0, a0, b0, g0c, BRIGHT.g0)
    assert np.max(np.abs(psi - ref)) < 1e-8


@settings(max_examples=15)
@given(st.floats(-1.0, 1.0), st.floats(0.0, 0.3), st.floats(0.5, 1.5), st.floats(-0.5, 0.5),
       st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-1.0, 1.0))
def test_plasma_travelling_argument(k, a0, b0, g0c, d0, e0, y):
    init = PhaseState.initial(alpha=a0, beta=b0, gamma=g0c, delta=d0, epsilon=e0)
    sol = assemble(plasma_linear(k), init, DARK, 1.5, y=y)
    st_ = sol.state(T)
    z = st_.beta[:, None] * X[None, :] + 2 * st_.gamma[:, None] * y + st_.epsilon[:, None]
    ref = plasma_z(X[None, :], y, T[:, None], k, a0, b0, g0c, d0, e0)
    assert np.max(np.abs(z - ref)) < 1e-9 * max(1.0, np.max(np.abs(ref)))


def test_free_particle_laws_match_closed_form():
    a0, b0, g0c, mu0 = 0.1, 0.8, 0.2, 1.3
    init = PhaseState.initial(mu=mu0, alpha=a0, beta=b0, gamma=g0c)
    sol = assemble(free_particle(), init, BRIGHT, 2.0, y=0.4)
    laws = sol.laws
    assert np.allclose(laws.h_of_t(T), free_particle_h(T, BRIGHT.h0, mu0, a0, b0), rtol=1e-10, atol=0)
    assert np.allclose(laws.h_alt(T), laws.h_of_t(T), rtol=1e-10, atol=0)
    assert np.allclose(laws.g_of_xt(0.0, T), free_particle_g(0.0, T, BRIGHT.g0, a0, b0, 0), rtol=1e-10)
    st_ = sol.state(T)
    z = st_.beta[:, None] * X[None, :] + 2 * st_.gamma[:, None] * 0.4
    ref_z = free_particle_z(X[None, :], 0.4, T[:, None], a0, b0, g0c)
    assert np.max(np.abs(z - ref_z)) < 1e-9
    # absorbed time-only forcing leaves no potential in the solved equation
    assert np.all(laws.pde_forcing(X, 0.5) == 0.0)


def test_free_particle_linear_forcing_law():
    init = PhaseState.initial(alpha=0.05, beta=0.9, gamma=0.1)
    laws = assemble(free_particle(), init, AIRY, 2.0, y=0.3).laws
    st_ = laws._state(0.6)
    z = st_.beta * X + 2 * st_.gamma * 0.3
    ref = free_particle_g(z, 0.6, AIRY.g0, 0.05, 0.9, 1)
    assert np.allclose(laws.g_of_xt(X, 0.6), ref, rtol=1e-10, atol=1e-14)


def test_harmonic_nonlinearity_law():
    init = PhaseState.initial(mu=0.7, alpha=0.2, beta=1.1)
    laws = assemble(harmonic_trap(), init, BRIGHT, 1.5).laws
    assert np.allclose(laws.h_of_t(T), harmonic_h(T, BRIGHT.h0, 0.7, 0.2, 1.1), rtol=1e-10, atol=0)


def test_modulus_is_profile_over_sqrt_mu():
    init = PhaseState.initial(mu=2.0, alpha=0.1, beta=1.2, gamma=0.05)
    sol = assemble(free_particle(), init, DARK, 2.0, y=0.2, phi=0.7)
    psi = evaluate_psi(sol, X[None, :], T[:, None])
    st_ = sol.state(T)
    z = st_.beta[:, None] * X[None, :] + 2 * st_.gamma[:, None] * 0.2
    expect = np.abs(_F(DARK)(z)) / np.sqrt(np.abs(st_.mu))[:, None]
    assert np.allclose(np.abs(psi), expect, rtol=1e-12, atol=1e-14)
    S = phase_S(sol, X[None, :], T[:, None])
    assert np.allclose(psi, np.exp(1j * S) * _F(DARK)(z) / np.sqrt(np.abs(st_.mu))[:, None], atol=1e-14)


def test_initial_slice_matches_initial_data():
    a0, b0, g0c, y, phi = 0.15, 0.9, -0.2, 0.5, 0.3
    init = PhaseState.initial(mu=1.5, alpha=a0, beta=b0, gamma=g0c)
    sol = assemble(fiber_optic("-(1 + 0.2*cos(t))"), init, BRIGHT, 1.0, y=y, phi=phi)
    z = b0 * X + 2 * g0c * y
    S = phi + a0 * X**2 + b0 * X * y + g0c * y * y
    ref = np.exp(1j * S) * _F(BRIGHT)(z) / np.sqrt(1.5)
    assert np.max(np.abs(evaluate_psi(sol, X, 0.0) - ref)) < 1e-13


def test_negative_mu_branch_flag():
    sol = assemble(free_particle(), PhaseState.initial(mu=-1.0), BRIGHT, 1.0)
    psi, branch = evaluate_psi(sol, X, 0.5, return_branch=True)
    assert np.all(branch == -1)
    assert np.all(np.isfinite(psi))


def test_scalar_evaluation_returns_complex():
    sol = assemble(free_particle(), PhaseState.initial(), BRIGHT, 1.0)
    assert isinstance(evaluate_psi(sol, 0.0, 0.3), complex)


def test_caustic_and_horizon_are_enforced():
    sol = assemble(free_particle(), PhaseState.initial(alpha=0.5), BRIGHT, 1.0)
    assert sol.caustic == pytest.approx(0.5, rel=1e-9)
    with pytest.raises(FocalPointError) as info:
        evaluate_psi(sol, X, 0.6)
    assert info.value.time == pytest.approx(0.5, rel=1e-9)
    with pytest.raises(DomainError):
        evaluate_psi(sol, X, -0.1)
    ok = assemble(free_particle(), PhaseState.initial(), BRIGHT, 1.0)
    with pytest.raises(DomainError):
        evaluate_psi(ok, X, 1.5)


def test_unsupported_forcing_exponent():
    with pytest.raises(UnsupportedRegimeError):
        make_balance_laws(None, PhaseState.initial(), 1.0, 1.0, 2)
    sol = assemble(free_particle(), PhaseState.initial(), BRIGHT, 1.0)
    with pytest.raises(UnsupportedRegimeError):
        forcing_gauge_phase(sol, 0.5)
    with pytest.raises(UnsupportedRegimeError):
        sol.laws.gauged_forcing(X, 0.5)


def test_perturbed_nonlinearity_scales_only_h():
    sol = assemble(free_particle(), PhaseState.initial(alpha=0.1), BRIGHT, 1.0)
    bumped = sol.laws.with_h0_scaled(1.01)
    assert np.allclose(bumped.h_of_t(T), 1.01 * sol.laws.h_of_t(T), rtol=1e-14)
    assert np.allclose(bumped.g_of_xt(0.0, T), sol.laws.g_of_xt(0.0, T), rtol=1e-14)


# ---------------------------------------------------------------------------
# m = 1 forcing gauge on the plasma background

def test_gauge_rate_antiderivative_symbolic():
    t, y, g0, a0, b0, c0 = sp.symbols("t y g0 a0 b0 c0", real=True)
    rate = plasma_gauge_rate(t, y, g0, a0, b0, c0)
    corrected = plasma_painleve_phase_corrected(t, y, g0, a0, b0, c0)
    single = plasma_painleve_phase_single_power(t, y, g0, a0, b0, c0)
    assert sp.simplify(sp.diff(corrected, t) - rate) == 0
    assert corrected.subs(t, 0) == 0
    assert sp.simplify(sp.diff(single, t) - rate) != 0


@pytest.mark.parametrize("a0,b0,g0c,y", [(0.0, 1.0, 0.1, 0.5), (0.2, 0.8, -0.3, 1.0), (0.1, 1.3, 0.0, -0.7)])
def test_gauge_phase_matches_corrected_antiderivative(a0, b0, g0c, y):
    init = PhaseState.initial(alpha=a0, beta=b0, gamma=g0c)
    sol = assemble(plasma_linear(0.0), init, AIRY, 2.0, y=y)
    phi = forcing_gauge_phase(sol, T)
    ref = plasma_painleve_phase_corrected(T, y, AIRY.g0, a0, b0, g0c)
    assert np.max(np.abs(phi - ref)) < 1e-10
    if a0 != 0.0 and g0c != 0.0:
        single = plasma_painleve_phase_single_power(T, y, AIRY.g0, a0, b0, g0c)
        assert np.max(np.abs(phi - single)) > 1e-3


def test_gauge_phase_unsorted_input():
    sol = assemble(plasma_linear(0.0), PhaseState.initial(alpha=0.1, gamma=0.2), AIRY, 2.0, y=0.4)
    t = np.array([0.7, 0.1, 0.4])
    assert np.allclose(forcing_gauge_phase(sol, t), [forcing_gauge_phase(sol, v) for v in t], atol=1e-13)


# ---------------------------------------------------------------------------
# autonomous reduction

def test_autonomous_map_and_residual():
    init = PhaseState.initial(alpha=0.1, beta=1.2)
    sol = assemble(free_particle(), init, BRIGHT, 2.0)
    xi, tau, chi = to_autonomous(sol, X, 0.5)
    st_ = sol.state(0.5)
    assert np.allclose(xi, st_.beta * X)
    assert np.allclose(tau, st_.gamma)
    # for y = 0 the reduced field is the bare profile up to the constant phase
    assert np.allclose(np.abs(chi), np.abs(_F(BRIGHT)(xi)), atol=1e-13)
    rep = autonomous_residual(sol, 0.1, 1.0, n=24)
    assert rep.rel_to_scale < 1e-4
    assert rep.shape == (24, 24)


def test_autonomization_needs_vanishing_linear_terms():
    sol = assemble(plasma_linear(0.5), PhaseState.initial(), DARK, 1.0)
    with pytest.raises(UnsupportedRegimeError):
        to_autonomous(sol, X, 0.3)
    sol = assemble(free_particle(), PhaseState.initial(delta=0.2), BRIGHT, 1.0)
    with pytest.raises(UnsupportedRegimeError):
        autonomous_residual(sol, 0.1, 0.5)
    sol = assemble(free_particle(), PhaseState.initial(), BRIGHT, 1.0)
    with pytest.raises(DomainError):
        autonomous_residual(sol, 0.0, 0.5)


# ---------------------------------------------------------------------------
# classical trajectory

def test_plasma_trajectory_accelerates_at_twice_k():
    k = 0.25
    sol = assemble(plasma_linear(k), PhaseState.initial(delta=0.1), DARK, 2.0)
    rep = classical_trajectory(sol, 0.0, 1.5, n=601)
    assert rep.velocity_residual < 1e-8
    assert rep.second_order_residual < 1e-6
    assert rep.z_drift < 1e-12
    c2 = np.polyfit(rep.t, rep.x, 2)[0]
    assert c2 == pytest.approx(2 * k, rel=1e-8)


def test_free_trajectory_is_uniform_motion():
    sol = assemble(free_particle(), PhaseState.initial(gamma=0.2), BRIGHT, 2.0, y=0.5)
    rep = classical_trajectory(sol, 0.0, 1.5, n=201)
    fit = np.polyfit(rep.t, rep.x, 1)
    assert np.max(np.abs(np.polyval(fit, rep.t) - rep.x)) < 1e-10
    assert rep.second_order_residual < 1e-8


def test_harmonic_trajectory_obeys_second_order_law():
    sol = assemble(harmonic_trap(), PhaseState.initial(gamma=0.3), BRIGHT, 1.4, y=0.6)
    rep = classical_trajectory(sol, n=801)
    assert rep.velocity_residual < 1e-7 and rep.second_order_residual < 1e-6


def test_trajectory_errors():
    sol = assemble(free_particle(), PhaseState.initial(), BRIGHT, 1.0)
    with pytest.raises(DomainError):
        classical_trajectory(sol, n=5)
    sol = assemble(fiber_optic("-1", "0"), PhaseState.initial(beta=0.0), BRIGHT, 1.0)
    with pytest.raises(TrajectoryError):
        classical_trajectory(sol)
