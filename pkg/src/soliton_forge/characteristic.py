"""Quadratic Hamiltonian coefficients and the characteristic equation.

The linear part of the problem is driven by

    mu'' - tau(t) mu' + 4 sigma(t) mu = 0,
    tau   = a'/a - 2c + 4d,
    sigma = ab - cd + d**2 + (d a'/a - d')/2,

whose standard solutions mu0 (mu0(0)=0, mu0'(0)=2a(0)) and mu1 (mu1(0)=1,
mu1'(0)=0) generate every phase function of the soliton ansatz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import sympy
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import DomainError, NumericalFailureError, RangeError

__all__ = [
    "Coefficient",
    "ExprCoefficient",
    "TabulatedCoefficient",
    "QuadraticCoefficients",
    "CharacteristicBasis",
    "PRESETS",
    "make_preset",
    "free_particle",
    "fiber_optic",
    "harmonic_trap",
    "bec_trap",
    "plasma_linear",
    "tau_sigma",
    "solve_basis",
    "reversibility_defect",
]

T_SYMBOL = sympy.Symbol("t", real=True)

RTOL = 1e-12
ATOL = 1e-14


def _as_output(t, values):
    arr = np.asarray(t, dtype=float)
    out = np.broadcast_to(np.asarray(values, dtype=float), arr.shape).astype(float)
    return float(out) if arr.ndim == 0 else out


class Coefficient:
    """A smooth real function of time together with its derivative."""

    label = ""

    def __call__(self, t):
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False

    def shifted(self, t0: float) -> "Coefficient":
        return _Shifted(self, t0)

    def describe(self):
        return self.label


class ExprCoefficient(Coefficient):
    """Closed-form coefficient given as a sympy-parsable expression in ``t``."""

    def __init__(self, expr, label: str = ""):
        if isinstance(expr, sympy.Basic):
            parsed = expr
        else:
            parsed = sympy.sympify(expr, locals={"t": T_SYMBOL})
        extra = parsed.free_symbols - {T_SYMBOL}
        if extra:
            names = ", ".join(sorted(str(s) for s in extra))
            raise DomainError(f"coefficient expression {expr!r} has unbound symbols: {names}")
        self.expr = parsed
        self.label = label or str(parsed)
        self._f = sympy.lambdify(T_SYMBOL, parsed, "numpy")
        self._df = sympy.lambdify(T_SYMBOL, sympy.diff(parsed, T_SYMBOL), "numpy")
        self._zero = parsed == 0

    def __call__(self, t):
        return _as_output(t, self._f(np.asarray(t, dtype=float)))

    def deriv(self, t):
        return _as_output(t, self._df(np.asarray(t, dtype=float)))

    @property
    def is_zero(self) -> bool:
        return bool(self._zero)

    def shifted(self, t0: float) -> "ExprCoefficient":
        return ExprCoefficient(self.expr.subs(T_SYMBOL, T_SYMBOL + t0))

    def describe(self):
        return str(self.expr)


class TabulatedCoefficient(Coefficient):
    """Coefficient sampled on a strictly increasing time table.

    Values are interpolated by a cubic spline. Derivatives are taken on the
    table with fourth-order stencils (centred inside, one-sided at the ends)
    and then interpolated.
    """

    def __init__(self, times, values, label: str = "tabulated", source: str | None = None):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 5:
            raise DomainError("tabulated coefficient needs >= 5 matching (time, value) samples")
        if np.any(np.diff(times) <= 0):
            raise DomainError("tabulated coefficient times must be strictly increasing")
        self.times = times
        self.values = values
        self.label = label
        self.source = source
        self._spline = CubicSpline(times, values)
        self._dspline = CubicSpline(times, _fd4_nonuniform(times, values))

    @classmethod
    def from_file(cls, path, label: str = ""):
        data = np.loadtxt(path, dtype=float, comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise DomainError(f"{path}: expected two columns (time value), got {data.shape[1]}")
        return cls(data[:, 0], data[:, 1], label=label or str(path), source=str(path))

    def _check(self, t):
        arr = np.asarray(t, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.times[-1]))
        if np.any(arr < self.times[0] - tol) or np.any(arr > self.times[-1] + tol):
            raise RangeError(
                f"t outside tabulated range [{self.times[0]}, {self.times[-1]}] of {self.label}"
            )
        return np.clip(arr, self.times[0], self.times[-1])

    def __call__(self, t):
        return _as_output(t, self._spline(self._check(t)))

    def deriv(self, t):
        return _as_output(t, self._dspline(self._check(t)))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    def describe(self):
        return {"file": self.source} if self.source else {"times": self.times.tolist(), "values": self.values.tolist()}


def _fd4_nonuniform(t, v):
    """Fourth-order derivative estimates at the table nodes.

    Each node uses the quartic through its 5-point neighbourhood: centred in
    the interior, one-sided at the first and last two nodes.
    """
    n = t.size
    d = np.empty(n)
    for i in range(n):
        lo = min(max(i - 2, 0), n - 5)
        idx = slice(lo, lo + 5)
        coef = np.polynomial.polynomial.polyfit(t[idx] - t[i], v[idx], 4)
        d[i] = coef[1]
    return d


class _Shifted(Coefficient):
    def __init__(self, inner: Coefficient, t0: float):
        self.inner = inner
        self.t0 = float(t0)
        self.label = f"{inner.label} shifted by {t0}"

    def __call__(self, t):
        return self.inner(np.asarray(t, dtype=float) + self.t0)

    def deriv(self, t):
        return self.inner.deriv(np.asarray(t, dtype=float) + self.t0)

    @property
    def is_zero(self) -> bool:
        return self.inner.is_zero


def as_coefficient(value, label: str = "") -> Coefficient:
    if isinstance(value, Coefficient):
        return value
    return ExprCoefficient(value, label=label)


ClosedBasis = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class QuadraticCoefficients:
    """The six time coefficients a, b, c, d (quadratic part) and f, g (linear part).

    ``t_end`` bounds the domain [0, t_end]; ``closed_basis`` optionally returns
    (mu0, mu0', mu1, mu1') in closed form for cross-checking.
    """

    a: Coefficient
    b: Coefficient
    c: Coefficient
    d: Coefficient
    f: Coefficient
    g: Coefficient
    name: str = "custom"
    t_end: float = math.inf
    closed_basis: ClosedBasis | None = field(default=None, compare=False, repr=False)
    params: Mapping = field(default_factory=dict, compare=False)

    @classmethod
    def from_values(cls, a, b=0, c=0, d=0, f=0, g=0, **kw) -> "QuadraticCoefficients":
        return cls(
            as_coefficient(a, "a"), as_coefficient(b, "b"), as_coefficient(c, "c"),
            as_coefficient(d, "d"), as_coefficient(f, "f"), as_coefficient(g, "g"), **kw,
        )

    def check_time(self, t) -> None:
        arr = np.asarray(t, dtype=float)
        if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > self.t_end):
            raise RangeError(f"time outside coefficient domain [0, {self.t_end}]")

    @property
    def linear_terms_vanish(self) -> bool:
        return self.f.is_zero and self.g.is_zero

    def shifted(self, t0: float) -> "QuadraticCoefficients":
        """Coefficients of the same problem seen from time origin ``t0``."""
        return QuadraticCoefficients(
            self.a.shifted(t0), self.b.shifted(t0), self.c.shifted(t0),
            self.d.shifted(t0), self.f.shifted(t0), self.g.shifted(t0),
            name=f"{self.name}@{t0}", t_end=self.t_end - t0, params=dict(self.params),
        )

    def describe(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            **{k: getattr(self, k).describe() for k in "abcdfg"},
        }


# ---------------------------------------------------------------------------
# presets

def free_particle(t_end: float = math.inf) -> QuadraticCoefficients:
    """i psi_t = psi_xx: a = -1, everything else zero."""

    def closed(t):
        t = np.asarray(t, dtype=float)
        return -2.0 * t, np.full_like(t, -2.0), np.ones_like(t), np.zeros_like(t)

    return QuadraticCoefficients.from_values(-1, name="FreeParticle", t_end=t_end, closed_basis=closed)


def fiber_optic(a="-1", d="0", t_end: float = math.inf) -> QuadraticCoefficients:
    """Fiber model with b = c = 0, dispersion a(t) and gain/loss d(t)."""
    return QuadraticCoefficients.from_values(
        a, 0, 0, d, name="FiberOptic", t_end=t_end, params={"a": str(a), "d": str(d)}
    )


def harmonic_trap(t_end: float = math.inf) -> QuadraticCoefficients:
    """a = b = 1/2: the unit-frequency harmonic oscillator."""

    def closed(t):
        t = np.asarray(t, dtype=float)
        return np.sin(t), np.cos(t), np.cos(t), -np.sin(t)

    return QuadraticCoefficients.from_values(
        sympy.Rational(1, 2), sympy.Rational(1, 2), name="HarmonicTrap", t_end=t_end, closed_basis=closed
    )


def bec_trap(omega="1", t_end: float = math.inf) -> QuadraticCoefficients:
    """Reduced Gross-Pitaevskii trap: a = 1/2, b = omega(t)**2 / 2."""
    w = sympy.sympify(omega, locals={"t": T_SYMBOL})
    return QuadraticCoefficients.from_values(
        sympy.Rational(1, 2), w**2 / 2, name="BECTrap", t_end=t_end, params={"omega": str(omega)}
    )


def plasma_linear(k=1.0, t_end: float = math.inf) -> QuadraticCoefficients:
    """Linearly inhomogeneous plasma: i psi_t + psi_xx + 2 k x psi = ..., so a = 1, f = 2k."""
    k = float(k)

    def closed(t):
        t = np.asarray(t, dtype=float)
        return 2.0 * t, np.full_like(t, 2.0), np.ones_like(t), np.zeros_like(t)

    return QuadraticCoefficients.from_values(
        1, 0, 0, 0, 2 * k, 0, name="PlasmaLinear", t_end=t_end, closed_basis=closed, params={"k": k}
    )


PRESETS: dict[str, Callable[..., QuadraticCoefficients]] = {
    "FreeParticle": free_particle,
    "FiberOptic": fiber_optic,
    "HarmonicTrap": harmonic_trap,
    "BECTrap": bec_trap,
    "PlasmaLinear": plasma_linear,
}


def make_preset(name: str, t_end: float = math.inf, **params) -> QuadraticCoefficients:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown coefficient preset {name!r}; known: {', '.join(PRESETS)}") from None
    coeffs = factory(t_end=t_end, **params)
    return coeffs


# ---------------------------------------------------------------------------

def tau_sigma(coeffs: QuadraticCoefficients, t):
    """Return (tau, sigma) of the characteristic equation at time(s) ``t``.

    The d'/d term is used in the regular form (d a'/a - d')/2, so d = 0 is allowed.
    """
    coeffs.check_time(t)
    a, da = coeffs.a(t), coeffs.a.deriv(t)
    b, c = coeffs.b(t), coeffs.c(t)
    d, dd = coeffs.d(t), coeffs.d.deriv(t)
    if np.any(np.asarray(a) == 0.0):
        raise DomainError("coefficient a(t) vanishes")
    tau = da / a - 2.0 * c + 4.0 * d
    sigma = a * b - c * d + d * d + 0.5 * (d * da / a - dd)
    return tau, sigma


# state layout of the characteristic integration
_MU0, _DMU0, _MU1, _DMU1, _TAU_INT, _LAM_EXP, _I1 = range(7)


class CharacteristicBasis:
    """Standard solutions mu0, mu1 of the characteristic equation on [0, T].

    Alongside the basis the integrator carries int_0^t tau (Wronskian check),
    int_0^t (c - 2d) (for lambda) and the regular first-level integral that
    defines the linear-term kernel delta0.  Immutable after construction.
    """

    def __init__(self, coeffs: QuadraticCoefficients, T: float, sol, a0: float, d0: float):
        self.coeffs = coeffs
        self.T = float(T)
        self._sol = sol
        self.a0 = a0
        self.d0 = d0
        self.mu1_0 = 1.0

    @property
    def mesh(self) -> np.ndarray:
        return self._sol.ts

    def _eval(self, t):
        arr = np.asarray(t, dtype=float)
        tol = 1e-12 * max(1.0, self.T)
        if np.any(~np.isfinite(arr)) or np.any(arr < -tol) or np.any(arr > self.T + tol):
            raise RangeError(f"time outside characteristic basis range [0, {self.T}]")
        y = self._sol(np.clip(arr, 0.0, self.T))
        return y

    def state(self, t):
        """Raw integrator state at t (7 rows)."""
        return self._eval(t)

    def mu0(self, t):
        return self._eval(t)[_MU0]

    def dmu0(self, t):
        return self._eval(t)[_DMU0]

    def mu1(self, t):
        return self._eval(t)[_MU1]

    def dmu1(self, t):
        return self._eval(t)[_DMU1]

    def tau_integral(self, t):
        return self._eval(t)[_TAU_INT]

    def lam(self, t):
        """lambda(t) = exp(-int_0^t (c - 2d) ds)."""
        return np.exp(-self._eval(t)[_LAM_EXP])

    def linear_integral(self, t):
        """int_0^t [(f - d g / a) mu0 + g mu0' / (2a)] / lambda ds."""
        return self._eval(t)[_I1]

    def wronskian(self, t):
        y = self._eval(t)
        return y[_MU0] * y[_DMU1] - y[_MU1] * y[_DMU0]

    def wronskian_expected(self, t):
        return -2.0 * self.a0 * np.exp(self.tau_integral(t))


def _rhs_factory(coeffs: QuadraticCoefficients):
    a, b, c, d, f, g = coeffs.a, coeffs.b, coeffs.c, coeffs.d, coeffs.f, coeffs.g
    linear = not coeffs.linear_terms_vanish

    def rhs(t, y):
        av, dav = a(t), a.deriv(t)
        if av == 0.0:
            raise DomainError(f"coefficient a(t) vanishes at t={t}")
        bv, cv = b(t), c(t)
        dv, ddv = d(t), d.deriv(t)
        tau = dav / av - 2.0 * cv + 4.0 * dv
        sigma = av * bv - cv * dv + dv * dv + 0.5 * (dv * dav / av - ddv)
        out = np.empty_like(y)
        out[_MU0] = y[_DMU0]
        out[_DMU0] = tau * y[_DMU0] - 4.0 * sigma * y[_MU0]
        out[_MU1] = y[_DMU1]
        out[_DMU1] = tau * y[_DMU1] - 4.0 * sigma * y[_MU1]
        out[_TAU_INT] = tau
        out[_LAM_EXP] = cv - 2.0 * dv
        if linear:
            fv, gv = f(t), g(t)
            out[_I1] = ((fv - dv * gv / av) * y[_MU0] + gv * y[_DMU0] / (2.0 * av)) * math.exp(y[_LAM_EXP])
        else:
            out[_I1] = 0.0
        return out

    return rhs


def solve_basis(coeffs: QuadraticCoefficients, T: float, rtol: float = RTOL, atol: float = ATOL) -> CharacteristicBasis:
    """Integrate the characteristic equation for the standard basis on [0, T]."""
    T = float(T)
    if not (T > 0.0 and math.isfinite(T)):
        raise DomainError(f"basis horizon T must be positive and finite, got {T!r}")
    coeffs.check_time(T)
    a0 = float(coeffs.a(0.0))
    if a0 == 0.0:
        raise DomainError("a(0) must be nonzero")
    d0 = float(coeffs.d(0.0))
    y0 = np.zeros(7)
    y0[_DMU0] = 2.0 * a0
    y0[_MU1] = 1.0
    sol = solve_ivp(
        _rhs_factory(coeffs), (0.0, T), y0, method="DOP853",
        rtol=rtol, atol=atol, dense_output=True,
    )
    if sol.status != 0:
        raise NumericalFailureError(f"characteristic integration failed: {sol.message}")
    return CharacteristicBasis(coeffs, T, sol.sol, a0, d0)


def reversibility_defect(basis: CharacteristicBasis) -> float:
    """Integrate both basis solutions back from T to 0; return max deviation from the ICs."""
    coeffs = basis.coeffs
    rhs = _rhs_factory(coeffs)
    yT = basis.state(basis.T)
    back = solve_ivp(rhs, (basis.T, 0.0), yT, method="DOP853", rtol=RTOL, atol=ATOL)
    if back.status != 0:
        raise NumericalFailureError(f"backward integration failed: {back.message}")
    y0 = back.y[:, -1]
    expected = np.array([0.0, 2.0 * basis.a0, 1.0, 0.0])
    return float(np.max(np.abs(y0[:4] - expected)))
