"""Gross-Pitaevskii reduction and Feshbach-resonance field programs.

Units: B in gauss, lengths as ratios to the Bohr radius a0, reduced time
tau = omega_perp * t.  All conversions happen in ``reduce_gpe``.

The reduced 1D equation is the variable-coefficient NLS with a = 1/2,
b = omega(tau)**2 / 2, c = d = 0 and nonlinearity kappa = 2 exp(Lambda) a_s/a0.
Matching kappa to the balance law h0 beta(0)**2 mu(0)**2 / (2 mu) gives

    a_s / a0 = h0 beta(0)**2 mu(0)**2 exp(-Lambda) / (4 mu),

and inverting a_s(B) = a_inf (1 + Delta0 / (B0 - B)) yields the tuning field

    B = B0 + 4 a_inf Delta0 exp(Lambda) mu / (4 a_inf exp(Lambda) mu - h0 beta(0)**2 mu(0)**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy
from scipy.integrate import quad
from scipy.optimize import brentq

from .characteristic import T_SYMBOL, QuadraticCoefficients, bec_trap
from .errors import DomainError, FocalPointError, PoleError

__all__ = [
    "FeshbachParams",
    "SolitonConstants",
    "ReducedSystem",
    "reduce_gpe",
    "scattering_length",
    "balance_scattering_ratio",
    "tuning_field",
    "synchronization_residual",
    "tuning_poles",
    "trap_frequency_from_mu",
    "field_program",
    "write_field_program",
    "FIELD_PROGRAM_HEADER",
]

FIELD_PROGRAM_HEADER = "tau B a_s_ratio kappa"


@dataclass(frozen=True)
class FeshbachParams:
    B0: float
    Delta0: float
    a_inf: float
    a0_bohr: float = 1.0

    def __post_init__(self):
        if self.Delta0 == 0.0:
            raise DomainError("resonance width Delta0 must be nonzero")
        if self.a_inf == 0.0:
            raise DomainError("off-resonance scattering length a_inf must be nonzero")


@dataclass(frozen=True)
class SolitonConstants:
    """Soliton constants entering the balance: h0, beta(0), mu(0)."""

    h0: float
    beta0: float
    mu0: float

    @property
    def strength(self) -> float:
        return self.h0 * self.beta0**2 * self.mu0**2


def _call(fun, t):
    if callable(fun):
        return np.asarray(fun(t), dtype=float)
    return np.broadcast_to(np.asarray(fun, dtype=float), np.shape(t)) * 1.0


def _scalar_or_array(t, v):
    return float(v) if np.ndim(t) == 0 else np.asarray(v)


def scattering_length(B, p: FeshbachParams):
    """a_s / a0 = a_inf (1 + Delta0 / (B0 - B))."""
    B = np.asarray(B, dtype=float)
    if np.any(B == p.B0):
        raise PoleError(f"scattering length has its resonance pole at B = B0 = {p.B0}")
    with np.errstate(divide="ignore"):
        out = p.a_inf * (1.0 + p.Delta0 / (p.B0 - B))
    return _scalar_or_array(B, out)


def balance_scattering_ratio(mu, Lambda, consts: SolitonConstants, t):
    """Scattering-length ratio demanded by the soliton: h0 b0**2 m0**2 exp(-Lambda) / (4 mu)."""
    m = _call(mu, t)
    if np.any(m == 0.0):
        raise FocalPointError("mu vanishes: the balance law has a focal point")
    return _scalar_or_array(t, consts.strength * np.exp(-_call(Lambda, t)) / (4.0 * m))


def tuning_field(mu, Lambda, consts: SolitonConstants, p: FeshbachParams, t):
    """Magnetic field B(t) realizing the balance law through the resonance."""
    m = _call(mu, t)
    e = np.exp(_call(Lambda, t))
    num = 4.0 * p.a_inf * p.Delta0 * e * m
    den = 4.0 * p.a_inf * e * m - consts.strength
    tiny = np.abs(den) <= 1e-14 * (np.abs(4.0 * p.a_inf * e * m) + abs(consts.strength))
    if np.any(tiny):
        tb = float(np.asarray(t, dtype=float).ravel()[int(np.argmax(np.ravel(tiny)))])
        raise PoleError(f"tuning field has a pole (zero denominator) at t={tb:.12g}", time=tb)
    return _scalar_or_array(t, p.B0 + num / den)


def synchronization_residual(mu, Lambda, consts: SolitonConstants, p: FeshbachParams, t) -> float:
    """max relative mismatch between a_s(B(t)) and the balance-law ratio."""
    B = tuning_field(mu, Lambda, consts, p, t)
    lhs = np.asarray(balance_scattering_ratio(mu, Lambda, consts, t))
    rhs = np.asarray(scattering_length(B, p))
    return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300)))


def tuning_poles(mu, Lambda, consts: SolitonConstants, p: FeshbachParams, t0: float, t1: float,
                 samples: int = 2001) -> list:
    """Times in [t0, t1] where the tuning-field denominator vanishes."""

    def den(s):
        return float(4.0 * p.a_inf * np.exp(_call(Lambda, s)) * _call(mu, s) - consts.strength)

    ts = np.linspace(t0, t1, samples)
    vals = np.array([den(s) for s in ts])
    roots = [float(s) for s, v in zip(ts, vals) if v == 0.0]
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(brentq(den, ts[i], ts[i + 1], xtol=1e-14))
    return sorted(roots)


def trap_frequency_from_mu(mu: Callable, t, h: float = 5e-3):
    """omega**2 = -mu''/mu with a fourth-order stencil (one-sided near t = 0)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t_arr)
    for i, s in enumerate(t_arr):
        m0 = float(mu(s))
        if m0 == 0.0:
            raise FocalPointError(f"mu vanishes at t={s}", time=float(s))
        if s - 2 * h >= 0.0:
            v = [float(mu(s + k * h)) for k in (-2, -1, 0, 1, 2)]
            d2 = (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h)
        else:
            v = np.array([float(mu(s + k * h)) for k in range(6)])
            d2 = float(np.array([45, -154, 214, -156, 61, -10]) @ v) / (12 * h * h)
        out[i] = -d2 / m0
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class ReducedSystem:
    """Dimensionless 1D system obtained from the 3D Gross-Pitaevskii equation."""

    omega_ratio_sq: Callable
    Lambda: Callable
    as_ratio: Callable
    a_perp: float
    omega_perp: float
    a0: float
    hbar: float
    mass: float

    def kappa_law(self, tau):
        """kappa(tau) = 2 exp(Lambda) a_s / a0."""
        return 2.0 * np.exp(self.Lambda(tau)) * self.as_ratio(tau)

    @staticmethod
    def g_law(g0: float, consts: SolitonConstants, mu: Callable) -> Callable:
        """Forcing law g(tau) = g0 beta(0)**2 mu(0)**2 / (2 mu**2)."""
        return lambda tau: g0 * consts.beta0**2 * consts.mu0**2 / (2.0 * np.asarray(mu(tau)) ** 2)

    def psi3d(self, psi1d, x, y, z, t):
        """Map a reduced solution psi1d(zeta, tau) back to Psi(r, t)."""
        t = np.asarray(t, dtype=float)
        tau = self.omega_perp * t
        env = np.exp(-1j * self.omega_perp * t - (np.asarray(x) ** 2 + np.asarray(y) ** 2) / (2 * self.a_perp**2)
                     + 0.5 * self.Lambda(tau))
        return env * psi1d(np.asarray(z) / self.a_perp, tau) / (math.sqrt(2 * math.pi * self.a0) * self.a_perp)


def _time_function(spec, label):
    expr = sympy.sympify(spec, locals={"t": T_SYMBOL})
    if expr.free_symbols - {T_SYMBOL}:
        raise DomainError(f"{label} may only depend on t")
    return expr


def reduce_gpe(omega_perp: float, omega0="1", eta="0", as_ratio=1.0, hbar: float = 1.0, mass: float = 1.0,
               a0: float = 1.0, t_end: float = math.inf) -> tuple[ReducedSystem, QuadraticCoefficients]:
    """Reduce the cigar-trap Gross-Pitaevskii problem to the 1D NLS in tau = omega_perp t.

    ``omega0`` and ``eta`` are expressions in the physical time t; ``as_ratio``
    is a constant or a function of tau giving a_s / a0.
    """
    omega_perp = float(omega_perp)
    if not omega_perp > 0:
        raise DomainError(f"transverse frequency must be positive, got {omega_perp}")
    if hbar <= 0 or mass <= 0 or a0 <= 0:
        raise DomainError("hbar, mass and a0 must be positive")
    w0 = _time_function(omega0, "omega0")
    et = _time_function(eta, "eta")
    ratio = (w0.subs(T_SYMBOL, T_SYMBOL / omega_perp) / omega_perp)
    ratio_sq = sympy.simplify(ratio**2)
    s = sympy.Symbol("s", real=True)
    lam_expr = sympy.integrate(et.subs(T_SYMBOL, s), (s, 0, T_SYMBOL / omega_perp))
    if lam_expr.has(sympy.Integral):
        eta_f = sympy.lambdify(T_SYMBOL, et, "numpy")

        def Lambda(tau):
            tau = np.asarray(tau, dtype=float)
            vals = [quad(eta_f, 0.0, v / omega_perp, epsabs=1e-13, epsrel=1e-12)[0] for v in np.ravel(tau)]
            return _scalar_or_array(tau, np.reshape(vals, tau.shape))
    else:
        lam_f = sympy.lambdify(T_SYMBOL, lam_expr, "numpy")

        def Lambda(tau):
            tau = np.asarray(tau, dtype=float)
            return _scalar_or_array(tau, np.broadcast_to(lam_f(tau), tau.shape) * 1.0)

    ratio_f = sympy.lambdify(T_SYMBOL, ratio_sq, "numpy")

    def omega_ratio_sq(tau):
        tau = np.asarray(tau, dtype=float)
        return _scalar_or_array(tau, np.broadcast_to(ratio_f(tau), tau.shape) * 1.0)

    def as_law(tau):
        return _scalar_or_array(tau, _call(as_ratio, tau))

    a_perp = math.sqrt(hbar / (mass * omega_perp))
    system = ReducedSystem(omega_ratio_sq, Lambda, as_law, a_perp, omega_perp, a0, hbar, mass)
    coeffs = bec_trap(omega=sympy.sqrt(ratio_sq) if not ratio_sq.is_zero else 0, t_end=t_end)
    return system, coeffs


def field_program(mu, Lambda, consts: SolitonConstants, p: FeshbachParams, taus, pole_tol: float = 1e-9):
    """Rows (tau, B, a_s/a0, kappa) with rows at or next to poles omitted; returns (rows, poles)."""
    taus = np.asarray(taus, dtype=float)
    poles = tuning_poles(mu, Lambda, consts, p, float(taus[0]), float(taus[-1])) if taus.size > 1 else []
    keep = np.ones(taus.shape, dtype=bool)
    span = float(taus[-1] - taus[0]) if taus.size > 1 else 1.0
    for tp in poles:
        keep &= np.abs(taus - tp) > pole_tol * max(1.0, span)
    t_ok = taus[keep]
    B = np.asarray(tuning_field(mu, Lambda, consts, p, t_ok))
    ratio = np.asarray(scattering_length(B, p))
    kappa = 2.0 * np.exp(_call(Lambda, t_ok)) * ratio
    return np.column_stack([t_ok, B, ratio, kappa]), poles


def write_field_program(path, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, np.asarray(rows, dtype=float).reshape(-1, 4), fmt="%.16e", delimiter=" ",
                   header=FIELD_PROGRAM_HEADER, comments="")
