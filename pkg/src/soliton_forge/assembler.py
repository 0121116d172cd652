"""Assembly of the full self-similar solution psi(x, t).

Given coefficients, initial phase data and a profile F, the solution is

    psi = exp(i phi) / sqrt|mu| * exp(i S0) * F(z),
    S0  = alpha x**2 + beta x y + gamma y**2 + delta x + epsilon y + kappa + xi,
    z   = beta x + 2 gamma y + epsilon,

and solves the variable-coefficient NLS when the nonlinearity follows
h(t) = h0 a beta**2 mu and the external forcing g0 a beta**2 z**m is present.
For m = 0 the forcing is a pure function of time and is absorbed into the
phase xi = g0 (gamma(0) - gamma(t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .characteristic import QuadraticCoefficients, solve_basis
from .errors import (
    DomainError,
    FocalPointError,
    NumericalFailureError,
    ReparameterizationError,
    TrajectoryError,
    UnsupportedRegimeError,
)
from .kernels import PhaseKernels, PhaseState, _d4, base_kernels, first_caustic, propagate
from .profile import SolitonProfile, profile_eval

__all__ = [
    "BalanceLaws",
    "SolitonSolution",
    "AutonomousReport",
    "TrajectoryReport",
    "make_balance_laws",
    "assemble",
    "evaluate_psi",
    "phase_S",
    "forcing_gauge_phase",
    "to_autonomous",
    "autonomous_residual",
    "classical_trajectory",
]


@dataclass(frozen=True)
class BalanceLaws:
    """Nonlinearity and forcing laws that make the ansatz an exact solution.

    ``absorbed`` (m = 0 only) means the time-only forcing g0 a beta**2 is
    carried by the xi phase, so the equation solved by psi has no forcing.
    ``h_scale`` multiplies h0 in the emitted h-law only (negative controls).
    """

    kernels: PhaseKernels
    init: PhaseState
    g0: float
    h0: float
    m: int
    y: float = 0.0
    absorbed: bool = True
    h_scale: float = 1.0

    def _state(self, t):
        return propagate(self.kernels, self.init, t)

    def h_of_t(self, t):
        st = self._state(t)
        return self.h_scale * self.h0 * self.kernels.coeffs.a(st.t) * st.beta**2 * st.mu

    def h_alt(self, t):
        """Same law written through lambda: h0 beta(0)**2 mu(0)**2 a lambda**2 / mu."""
        st = self._state(t)
        i = self.init
        return (self.h_scale * self.h0 * i.beta**2 * i.mu**2 * self.kernels.coeffs.a(st.t)
                * self.kernels.lam(st.t) ** 2 / st.mu)

    def g_of_xt(self, x, t):
        t_arr = np.asarray(t, dtype=float)
        st = self._state(t_arr)
        base = self.g0 * self.kernels.coeffs.a(st.t) * st.beta**2
        if self.m == 0:
            return np.broadcast_to(base, np.broadcast(t_arr, np.asarray(x)).shape) * 1.0
        z = st.beta * np.asarray(x, dtype=float) + 2.0 * st.gamma * self.y + st.epsilon
        return base * z

    def pde_forcing(self, x, t):
        """Forcing potential in the equation satisfied by the emitted psi."""
        if self.m == 0 and self.absorbed:
            return np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)
        return self.g_of_xt(x, t)

    def gauged_forcing(self, x, t):
        """Forcing g0 a beta**3 x left after the m = 1 phase gauge."""
        if self.m != 1:
            raise UnsupportedRegimeError("the forcing gauge applies to m = 1 only")
        st = self._state(np.asarray(t, dtype=float))
        return self.g0 * self.kernels.coeffs.a(st.t) * st.beta**3 * np.asarray(x, dtype=float)

    def with_h0_scaled(self, factor: float) -> "BalanceLaws":
        return replace(self, h_scale=self.h_scale * float(factor))


def make_balance_laws(kernels: PhaseKernels, init: PhaseState, g0: float, h0: float, m: int,
                      y: float = 0.0, absorbed: bool = True) -> BalanceLaws:
    if m not in (0, 1):
        raise UnsupportedRegimeError(f"forcing exponent m={m!r} unsupported (only m = 0 or 1)")
    return BalanceLaws(kernels, init, float(g0), float(h0), int(m), float(y), bool(absorbed and m == 0))


@dataclass(frozen=True)
class SolitonSolution:
    coeffs: QuadraticCoefficients
    kernels: PhaseKernels
    init: PhaseState
    profile: SolitonProfile
    phi: float = 0.0
    y: float = 0.0
    absorbed: bool = True
    caustic: float | None = None
    laws: BalanceLaws = field(default=None, repr=False, compare=False)

    @property
    def T(self) -> float:
        return self.kernels.T

    @property
    def validity_end(self) -> float:
        return self.T if self.caustic is None else self.caustic

    def state(self, t) -> PhaseState:
        self.check_times(t)
        g0 = self.profile.g0 if (self.profile.m == 0 and self.absorbed) else 0.0
        return propagate(self.kernels, self.init, t, g0=g0)

    def check_times(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > self.T * (1 + 1e-12)):
            raise DomainError(f"time outside the solution horizon [0, {self.T}]")
        if self.caustic is not None and np.any(arr >= self.caustic):
            raise FocalPointError(f"requested time reaches the caustic at t={self.caustic:.12g}",
                                  time=self.caustic)


def assemble(coeffs: QuadraticCoefficients, init: PhaseState, profile: SolitonProfile, T: float,
             phi: float = 0.0, y: float = 0.0, absorbed: bool = True) -> SolitonSolution:
    """Solve the linear structure on [0, T] and bind it to a profile."""
    if profile.m not in (0, 1):
        raise UnsupportedRegimeError(f"forcing exponent m={profile.m!r} unsupported")
    kernels = base_kernels(solve_basis(coeffs, T), coeffs)
    caustic = first_caustic(kernels, init)
    absorbed = bool(absorbed and profile.m == 0)
    laws = make_balance_laws(kernels, init, profile.g0, profile.h0, profile.m, y, absorbed)
    sol = SolitonSolution(coeffs, kernels, init, profile, float(phi), float(y), absorbed, caustic, laws)
    end = sol.validity_end
    probe = np.linspace(0.0, end, 7)[1:-1]
    h1, h2 = laws.h_of_t(probe), laws.h_alt(probe)
    if np.max(np.abs(h1 - h2)) > 1e-8 * max(1.0, float(np.max(np.abs(h1)))):
        raise NumericalFailureError("balance identity for the nonlinearity law violated at assembly")
    return sol


def _prepare(sol: SolitonSolution, x, t):
    t_arr = np.asarray(t, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    st = sol.state(t_arr)
    return x_arr, st


def phase_S(sol: SolitonSolution, x, t):
    """Real phase of psi (including phi), broadcast over x and t."""
    x, st = _prepare(sol, x, t)
    y = sol.y
    return (sol.phi + st.alpha * x * x + st.beta * x * y + st.gamma * y * y + st.delta * x
            + st.epsilon * y + st.kappa + st.xi)


def evaluate_psi(sol: SolitonSolution, x, t, gauge: bool = False, return_branch: bool = False):
    """psi(x, t) with numpy broadcasting between x and t.

    Where mu < 0 the amplitude uses |mu| and the branch flag is -1.  With
    ``gauge`` (m = 1) the forcing-gauge phase is applied, returning the field
    that solves the equation with the linear potential g0 a beta**3 x.
    """
    x, st = _prepare(sol, x, t)
    y = sol.y
    z = st.beta * x + 2.0 * st.gamma * y + st.epsilon
    F, _ = profile_eval(sol.profile, z)
    S = (sol.phi + st.alpha * x * x + st.beta * x * y + st.gamma * y * y + st.delta * x
         + st.epsilon * y + st.kappa + st.xi)
    if gauge:
        S = S + forcing_gauge_phase(sol, np.asarray(t, dtype=float))
    psi = np.exp(1j * S) * F / np.sqrt(np.abs(st.mu))
    if np.ndim(psi) == 0:
        psi = complex(psi)
    if return_branch:
        return psi, st.branch
    return psi


def forcing_gauge_phase(sol: SolitonSolution, t):
    """Phi(t) = int_0^t g0 a beta**2 (2 gamma y + epsilon) ds (m = 1 gauge)."""
    if sol.profile.m != 1:
        raise UnsupportedRegimeError("the forcing gauge applies to m = 1 only")
    t_arr = np.asarray(t, dtype=float)
    sol.check_times(t_arr)
    g0, y, a = sol.profile.g0, sol.y, sol.coeffs.a

    def rate(s):
        st = propagate(sol.kernels, sol.init, s)
        return g0 * a(s) * st.beta**2 * (2.0 * st.gamma * y + st.epsilon)

    flat = t_arr.ravel()
    order = np.argsort(flat)
    out = np.empty_like(flat)
    acc, prev = 0.0, 0.0
    for i in order:
        ti = flat[i]
        if ti > prev:
            val, err = quad(rate, prev, ti, epsabs=1e-13, epsrel=1e-12, limit=200)
            acc += val
            prev = ti
        out[i] = acc
    res = out.reshape(t_arr.shape)
    return float(res) if t_arr.ndim == 0 else res


# ---------------------------------------------------------------------------
# autonomization

def _require_autonomizable(sol: SolitonSolution):
    if sol.profile.m != 0:
        raise UnsupportedRegimeError("autonomization is defined for m = 0 only")
    i = sol.init
    if not sol.coeffs.linear_terms_vanish or i.delta or i.epsilon or i.kappa:
        raise UnsupportedRegimeError("autonomization needs delta = epsilon = kappa = 0")


def to_autonomous(sol: SolitonSolution, x, t):
    """Return (xi, tau, chi) with xi = beta x, tau = gamma, chi = sqrt|mu| exp(-i alpha x**2) psi.

    The absorbed forcing phase is removed as well, so chi solves
    i chi_tau + g0 chi + h0 |chi|**2 chi - chi_xixi = 0.
    """
    _require_autonomizable(sol)
    x, st = _prepare(sol, x, t)
    psi = evaluate_psi(sol, x, t)
    chi = np.sqrt(np.abs(st.mu)) * np.exp(-1j * (st.alpha * x * x + st.xi)) * psi
    return st.beta * x, st.gamma * np.ones_like(chi.real), chi


@dataclass(frozen=True)
class AutonomousReport:
    max_abs: float
    rel_to_scale: float
    worst_point: tuple
    tau_range: tuple
    xi_range: tuple
    shape: tuple


def autonomous_residual(sol: SolitonSolution, t0: float, t1: float, n: int = 64,
                        xi_max: float = 8.0, h_xi: float = 1e-2, h_tau: float = 1e-3) -> AutonomousReport:
    """Finite-difference residual of the autonomous NLS on an n x n mapped (xi, tau) grid."""
    _require_autonomizable(sol)
    if not (0.0 < t0 < t1):
        raise DomainError("need 0 < t0 < t1 for the mapped grid")
    sol.check_times([t0, t1])
    probe = np.linspace(t0, t1, 257)
    gam = sol.state(probe).gamma
    steps = np.diff(gam)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ReparameterizationError("gamma(t) is not monotone on the window; tau = gamma is not a time")
    g_lo, g_hi = float(gam[0]), float(gam[-1])
    span = g_hi - g_lo
    taus = np.linspace(g_lo, g_hi, n + 4)[2:-2]  # keep the tau stencil inside the window
    h_tau = math.copysign(min(h_tau, abs(span) / (n + 4)), 1.0)
    xis = np.linspace(-xi_max, xi_max, n)

    def t_of_tau(tau):
        return brentq(lambda s: sol.state(s).gamma - tau, t0, t1, xtol=1e-15, rtol=1e-15, maxiter=200)

    def chi_at(xi, tau):
        ts = np.array([t_of_tau(v) for v in np.atleast_1d(tau)])
        st = sol.state(ts)
        xs = xi[None, :] / st.beta[:, None]
        psi = evaluate_psi(sol, xs, ts[:, None])
        return np.sqrt(np.abs(st.mu))[:, None] * np.exp(-1j * (st.alpha[:, None] * xs * xs + st.xi[:, None])) * psi

    c0 = chi_at(xis, taus)
    d_tau = (chi_at(xis, taus - 2 * h_tau) - 8 * chi_at(xis, taus - h_tau)
             + 8 * chi_at(xis, taus + h_tau) - chi_at(xis, taus + 2 * h_tau)) / (12 * h_tau)
    d_xixi = (-chi_at(xis - 2 * h_xi, taus) + 16 * chi_at(xis - h_xi, taus) - 30 * c0
              + 16 * chi_at(xis + h_xi, taus) - chi_at(xis + 2 * h_xi, taus)) / (12 * h_xi**2)
    g0, h0 = sol.profile.g0, sol.profile.h0
    terms = [1j * d_tau, g0 * c0, h0 * np.abs(c0) ** 2 * c0, -d_xixi]
    res = np.abs(sum(terms))
    scale = max(float(np.max(np.abs(p))) for p in terms)
    idx = np.unravel_index(int(np.argmax(res)), res.shape)
    return AutonomousReport(float(res[idx]), float(res[idx]) / scale if scale else float(res[idx]),
                            (float(xis[idx[1]]), float(taus[idx[0]])), (g_lo, g_hi), (-xi_max, xi_max), res.shape)


# ---------------------------------------------------------------------------
# classical trajectory

def _d2_4(y, h):
    """Fourth-order second derivative on a uniform grid (one-sided 6-point ends)."""
    y = np.asarray(y, dtype=float)
    d = np.empty_like(y)
    d[2:-2] = (-y[:-4] + 16 * y[1:-3] - 30 * y[2:-2] + 16 * y[3:-1] - y[4:]) / (12 * h * h)
    w0 = np.array([45, -154, 214, -156, 61, -10]) / 12.0
    w1 = np.array([10, -15, -4, 14, -6, 1]) / 12.0
    d[0] = w0 @ y[:6] / h**2
    d[1] = w1 @ y[:6] / h**2
    d[-1] = w0 @ y[-6:][::-1] / h**2
    d[-2] = w1 @ y[-6:][::-1] / h**2
    return d


@dataclass(frozen=True)
class TrajectoryReport:
    t: np.ndarray
    x: np.ndarray
    z_value: float
    z_drift: float
    velocity_residual: float
    second_order_residual: float


def classical_trajectory(sol: SolitonSolution, t0: float = 0.0, t1: float | None = None, n: int = 401,
                         z_value: float = 0.0) -> TrajectoryReport:
    """Path x_c(t) along which the travelling argument stays at ``z_value``.

    Both the first-order velocity law and the second-order (forced, damped
    parametric oscillator) law are checked by finite differences; residuals
    are relative to the largest term of each law.
    """
    t1 = sol.validity_end * (1 - 1e-9) if t1 is None else float(t1)
    if n < 9:
        raise DomainError("need at least 9 trajectory samples")
    t = np.linspace(t0, t1, n)
    st = sol.state(t)
    if np.any(st.beta == 0.0) or np.any(np.sign(st.beta) != np.sign(st.beta[0])):
        raise TrajectoryError("beta(t) crosses zero: the classical trajectory is undefined")
    y = sol.y
    x = (z_value - 2.0 * st.gamma * y - st.epsilon) / st.beta
    z = st.beta * x + 2.0 * st.gamma * y + st.epsilon
    c = sol.coeffs
    a, da = c.a(t), c.a.deriv(t)
    b, cc, dcc = c.b(t), c.c(t), c.c.deriv(t)
    f, g, dg = c.f(t), c.g(t), c.g.deriv(t)
    h = t[1] - t[0]
    dx = _d4(x, h)
    ddx = _d2_4(x, h)
    beta_rate = -(cc + 4.0 * a * st.alpha)  # beta'/beta
    v_terms = [dx, beta_rate * x, -2.0 * a * st.beta * y, -2.0 * a * st.delta, g]
    s_terms = [ddx, -(da / a) * dx, (4 * a * b - cc * cc + cc * da / a - dcc) * x,
               -2.0 * a * f, -(da / a - cc) * g, dg]

    def scale(parts):
        return max(float(np.max(np.abs(np.broadcast_to(p, t.shape)))) for p in parts)

    def rel(parts, sc):
        r = float(np.max(np.abs(sum(np.broadcast_to(p, t.shape) for p in parts))))
        return r / sc if sc > 0 else r

    # uniform motion makes every second-order term vanish; measure it against velocity / time span
    v_scale = scale(v_terms)
    s_scale = max(scale(s_terms), v_scale / max(t1 - t0, 1e-300))
    return TrajectoryReport(t, x, float(z_value), float(np.max(np.abs(z - z_value))),
                            rel(v_terms, v_scale), rel(s_terms, s_scale))
