"""Phase kernels and propagation of the time-dependent phase data.

The phase functions of the soliton ansatz obey the Riccati-type system

    alpha' + b + 2 c alpha + 4 a alpha**2 = 0
    beta'  + (c + 4 a alpha) beta          = 0
    gamma' + a beta**2                     = 0
    delta' + (c + 4 a alpha) delta         = f + 2 alpha g
    epsilon' = (g - 2 a delta) beta
    kappa'   = g delta - a delta**2

whose fundamental ("kernel") solutions are written through the standard
basis mu0, mu1 of the characteristic equation.  Arbitrary initial data are
then carried to time t by closed rational formulas in those kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import brentq

from .characteristic import CharacteristicBasis, QuadraticCoefficients, solve_basis, tau_sigma
from .errors import (
    DiagnosticsError,
    DomainError,
    FocalPointError,
    IntegrabilityError,
    NumericalFailureError,
    PoleError,
)

__all__ = [
    "PhaseKernels",
    "PhaseState",
    "RiccatiReport",
    "base_kernels",
    "propagate",
    "riccati_rhs",
    "riccati_residuals",
    "sample_trajectory",
    "first_caustic",
    "continuity_defect",
    "bkernel_defect",
    "SMALL_T",
    "reseeded",
]

SMALL_T = 1e-6
"""Below this time propagate uses the pole-free rearranged formulas."""

_DELTA_SERIES_T = 1e-5
_QUAD_EPSABS = 1e-10
_QUAD_EPSREL = 1e-12
_SCAN_SUBDIV = 8
_NODE_SPACING = 0.02
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _out(t_arr, v):
    v = np.asarray(v, dtype=float)
    return float(v) if t_arr.ndim == 0 else v


def _sign_change_root(fun, ts, vals):
    """First root of fun on the sampled points ts (vals = fun(ts)), or None."""
    zero = np.nonzero(vals == 0.0)[0]
    first_zero = ts[zero[0]] if zero.size else None
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    root = None
    if flips.size:
        i = flips[0]
        root = brentq(fun, ts[i], ts[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    cands = [r for r in (first_zero, root) if r is not None]
    return min(cands) if cands else None


def _refined_grid(mesh, t_lo, t_hi, n=_SCAN_SUBDIV):
    nodes = np.unique(np.concatenate(([t_lo, t_hi], mesh[(mesh > t_lo) & (mesh < t_hi)])))
    pieces = [np.linspace(nodes[i], nodes[i + 1], n + 1)[:-1] for i in range(len(nodes) - 1)]
    return np.concatenate(pieces + [nodes[-1:]])


class PhaseKernels:
    """Kernel functions alpha0, beta0, gamma0, lambda, delta0, epsilon0, kappa0.

    alpha0, beta0 and gamma0 carry a simple pole at t = 0 and raise PoleError
    there.  The linear-term kernels need 1/mu0' to stay finite, so they are
    only available before the first turning point of mu0.
    """

    def __init__(self, basis: CharacteristicBasis, coeffs: QuadraticCoefficients):
        self.basis = basis
        self.coeffs = coeffs
        self.T = basis.T
        self.a0 = basis.a0
        self.d0 = basis.d0
        self.linear = not coeffs.linear_terms_vanish
        self._turning = None
        self._cum = None
        if self.linear:
            grid = _refined_grid(basis.mesh, 0.0, self.T)
            self._turning = _sign_change_root(basis.dmu0, grid, basis.dmu0(grid))

    # -- pole-bearing kernels -------------------------------------------------
    def _pole_guard(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr <= 0.0):
            raise PoleError("kernel evaluated at t <= 0 (simple pole at the origin)", time=0.0)
        return arr

    def alpha0(self, t):
        arr = self._pole_guard(t)
        c = self.coeffs
        return _out(arr, self.basis.dmu0(arr) / (4.0 * c.a(arr) * self.basis.mu0(arr)) - c.d(arr) / (2.0 * c.a(arr)))

    def beta0(self, t):
        arr = self._pole_guard(t)
        return _out(arr, -self.basis.lam(arr) / self.basis.mu0(arr))

    def gamma0(self, t):
        arr = self._pole_guard(t)
        b = self.basis
        return _out(arr, b.mu1(arr) / (2.0 * b.mu1_0 * b.mu0(arr)) + self.d0 / (2.0 * self.a0))

    def lam(self, t):
        arr = np.asarray(t, dtype=float)
        return _out(arr, self.basis.lam(arr))

    # -- linear-term kernels ---------------------------------------------------
    @property
    def turning_point(self):
        """First zero of mu0' in (0, T], or None."""
        return self._turning

    def _check_integrable(self, arr):
        if self._turning is not None and np.any(arr >= self._turning):
            raise IntegrabilityError(
                f"mu0' vanishes at t={self._turning:.12g}; the linear-term kernels are not "
                "integrable past this turning point",
                time=self._turning,
            )

    def _integrands(self, s):
        c = self.coeffs
        y = self.basis.state(s)
        dmu0 = y[1]
        lam = np.exp(-y[5])
        P = lam * y[6]
        a = c.a(s)
        q = c.f(s) - c.d(s) * c.g(s) / a
        _, sigma = tau_sigma(c, s)
        return np.array([
            a * sigma * lam * P / dmu0**2,
            a * lam * q / dmu0,
            a * sigma * P * P / dmu0**2,
            a * P * q / dmu0,
        ])

    def _integrate(self, lo, hi):
        if hi <= lo:
            return np.zeros(4)
        val, err = quad_vec(self._integrands, lo, hi, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL,
                            quadrature="gk21", limit=400)
        if not np.all(np.isfinite(val)) or np.max(err) > 1e3 * _QUAD_EPSABS + 1e-8 * np.max(np.abs(val)):
            raise NumericalFailureError(f"kernel quadrature did not converge on [{lo}, {hi}]")
        return val

    def _cumulative(self):
        if self._cum is None:
            end = self.T if self._turning is None else self._turning
            mesh = self.basis.mesh[self.basis.mesh < end]
            n_fill = int(np.ceil(end / _NODE_SPACING))
            nodes = np.unique(np.concatenate(([0.0], mesh, np.linspace(0.0, end, n_fill + 1)[:-1])))
            acc = np.zeros((len(nodes), 4))
            for i in range(1, len(nodes)):
                acc[i] = acc[i - 1] + self._integrate(nodes[i - 1], nodes[i])
            self._cum = (nodes, acc)
        return self._cum

    def _J(self, t):
        """Cumulative kernel integrals at the times t (4 rows).

        Node values come from adaptive Gauss-Kronrod; the short remainder from
        the nearest node uses a fixed Gauss-Legendre rule, vectorized over t.
        """
        nodes, acc = self._cumulative()
        t = np.asarray(t, dtype=float)
        i = np.searchsorted(nodes, t, side="right") - 1
        lo = nodes[i]
        half = 0.5 * (t - lo)
        s = lo[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
        vals = self._integrands(s.ravel()).reshape(4, t.size, _GL_X.size)
        return acc[i].T + half[None, :] * (vals @ _GL_W)

    def _delta0_arr(self, arr):
        b, c = self.basis, self.coeffs
        out = np.empty_like(arr)
        small = arr < _DELTA_SERIES_T
        big = ~small
        if np.any(big):
            tb = arr[big]
            out[big] = b.lam(tb) * b.linear_integral(tb) / b.mu0(tb)
        if np.any(small):
            # 0/0 at the origin: ratio of derivatives taken at the midpoint
            h = 0.5 * arr[small]
            y = b.state(h)
            lam = np.exp(-y[5])
            a = c.a(h)
            dI1 = ((c.f(h) - c.d(h) * c.g(h) / a) * y[0] + c.g(h) * y[1] / (2.0 * a)) / lam
            dP = -(c.c(h) - 2.0 * c.d(h)) * lam * y[6] + lam * dI1
            out[small] = dP / y[1]
        return out

    def linear_kernels(self, t):
        """(delta0, epsilon0, kappa0) at t >= 0; zero when f = g = 0."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError("linear kernels need t >= 0")
        if not self.linear:
            z = np.zeros_like(arr)
            return _out(arr, z), _out(arr, z), _out(arr, z)
        flat = np.atleast_1d(arr).ravel()
        self._check_integrable(flat)
        b, c = self.basis, self.coeffs
        d0 = self._delta0_arr(flat)
        J = self._J(flat)
        a = c.a(flat)
        lam = b.lam(flat)
        dmu0 = b.dmu0(flat)
        P = lam * b.linear_integral(flat)
        eps0 = -2.0 * a * lam * d0 / dmu0 + 8.0 * J[0] + 2.0 * J[1]
        kap0 = a * P * d0 / dmu0 - 4.0 * J[2] - 2.0 * J[3]
        shape = arr.shape
        return (_out(arr, d0.reshape(shape)), _out(arr, eps0.reshape(shape)), _out(arr, kap0.reshape(shape)))

    def delta0(self, t):
        return self.linear_kernels(t)[0]

    def epsilon0(self, t):
        return self.linear_kernels(t)[1]

    def kappa0(self, t):
        return self.linear_kernels(t)[2]


def base_kernels(basis: CharacteristicBasis, coeffs: QuadraticCoefficients | None = None) -> PhaseKernels:
    """Build the kernels from a solved characteristic basis."""
    return PhaseKernels(basis, basis.coeffs if coeffs is None else coeffs)


@dataclass(frozen=True)
class PhaseState:
    """Phase/scale data of the ansatz at time t (fields may be arrays over t).

    ``branch`` is -1 where mu < 0, +1 elsewhere.
    """

    t: float
    mu: float
    alpha: float
    beta: float
    gamma: float
    delta: float = 0.0
    epsilon: float = 0.0
    kappa: float = 0.0
    xi: float = 0.0

    @classmethod
    def initial(cls, mu=1.0, alpha=0.0, beta=1.0, gamma=0.0, delta=0.0, epsilon=0.0, kappa=0.0):
        if mu == 0.0:
            raise DomainError("initial mu must be nonzero")
        return cls(0.0, float(mu), float(alpha), float(beta), float(gamma),
                   float(delta), float(epsilon), float(kappa), 0.0)

    @property
    def branch(self):
        return np.where(np.asarray(self.mu) < 0.0, -1, 1)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def at(self, i) -> "PhaseState":
        """Pick sample i of an array-valued state."""
        return PhaseState(**{k: float(np.asarray(v)[i]) for k, v in self.as_dict().items()})

    def with_time(self, t: float) -> "PhaseState":
        return replace(self, t=float(t))


def _check_initial(init: PhaseState):
    if np.ndim(init.mu) or init.t != 0.0:
        raise DomainError("propagate expects a scalar initial state at t = 0")


def propagate(kernels: PhaseKernels, init: PhaseState, t, g0: float = 0.0) -> PhaseState:
    """Carry initial phase data to time(s) t in (0, T].

    ``g0`` sets the constant-forcing phase xi = g0 (gamma(0) - gamma(t)); pass 0
    when the forcing is not absorbed into the phase.
    """
    _check_initial(init)
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > kernels.T * (1 + 1e-12)):
        raise DomainError(f"propagation time outside [0, {kernels.T}]")
    b, c = kernels.basis, kernels.coeffs
    flat = np.atleast_1d(arr).ravel()
    y = b.state(flat)
    mu0, dmu0, mu1, dmu1 = y[0], y[1], y[2], y[3]
    lam = np.exp(-y[5])
    a0, d0 = kernels.a0, kernels.d0
    # D = mu0 (alpha(0) + gamma0): finite at t = 0, D(0) = 1/2
    D = init.alpha * mu0 + mu1 / (2.0 * b.mu1_0) + d0 * mu0 / (2.0 * a0)
    dD = init.alpha * dmu0 + dmu1 / (2.0 * b.mu1_0) + d0 * dmu0 / (2.0 * a0)
    scale = np.abs(init.alpha * mu0) + np.abs(mu1) + np.abs(d0 * mu0 / a0) + np.abs(mu0)
    bad = np.abs(D) <= 1e-10 * scale
    if np.any(bad):
        tb = float(flat[np.argmax(bad)])
        raise FocalPointError(f"focal point: mu(t) vanishes at t={tb:.12g}", time=tb)
    de, ep, ka = kernels.linear_kernels(flat)
    de, ep, ka = (np.atleast_1d(v) for v in (de, ep, ka))
    s = init.delta + ep

    a, d = c.a(flat), c.d(flat)
    mu = 2.0 * init.mu * D
    alpha = np.empty_like(flat)
    beta = np.empty_like(flat)
    gamma = np.empty_like(flat)
    delta = np.empty_like(flat)
    eps = np.empty_like(flat)
    kap = np.empty_like(flat)

    small = flat < SMALL_T
    if np.any(small):
        m = small
        alpha[m] = dD[m] / (4.0 * a[m] * D[m]) - d[m] / (2.0 * a[m])
        beta[m] = init.beta * lam[m] / (2.0 * D[m])
        gamma[m] = init.gamma - init.beta**2 * mu0[m] / (4.0 * D[m])
        delta[m] = de[m] + lam[m] * s[m] / (2.0 * D[m])
        eps[m] = init.epsilon - init.beta * s[m] * mu0[m] / (2.0 * D[m])
        kap[m] = init.kappa + ka[m] - s[m] ** 2 * mu0[m] / (4.0 * D[m])
    big = ~small
    if np.any(big):
        m = big
        tb = flat[m]
        A = init.alpha + kernels.gamma0(tb)
        al0 = kernels.alpha0(tb)
        be0 = kernels.beta0(tb)
        alpha[m] = al0 - be0**2 / (4.0 * A)
        beta[m] = -init.beta * be0 / (2.0 * A)
        gamma[m] = init.gamma - init.beta**2 / (4.0 * A)
        delta[m] = de[m] - be0 * s[m] / (2.0 * A)
        eps[m] = init.epsilon - init.beta * s[m] / (2.0 * A)
        kap[m] = init.kappa + ka[m] - s[m] ** 2 / (4.0 * A)
    xi = g0 * (init.gamma - gamma)

    shape = arr.shape

    def pack(v):
        return _out(arr, v.reshape(shape))

    return PhaseState(_out(arr, flat.reshape(shape)), pack(mu), pack(alpha), pack(beta), pack(gamma),
                      pack(delta), pack(eps), pack(kap), pack(xi))


def bkernel_defect(kernels: PhaseKernels, init: PhaseState, t) -> float:
    """max |beta_kernel - beta(0) mu(0) lambda / mu| relative to |beta| over t > 0."""
    st = propagate(kernels, init, t)
    alt = init.beta * init.mu * kernels.lam(t) / st.mu
    return float(np.max(np.abs(np.asarray(st.beta) - alt) / np.maximum(1.0, np.abs(alt))))


def first_caustic(kernels: PhaseKernels, init: PhaseState, t_max: float | None = None):
    """First time in (0, t_max] where mu(t) = 0, or None."""
    _check_initial(init)
    t_max = kernels.T if t_max is None else float(t_max)
    b = kernels.basis
    k = 1.0 / (2.0 * b.mu1_0)
    r = kernels.d0 / (2.0 * kernels.a0)

    def D(s):
        y = b.state(s)
        return init.alpha * y[0] + k * y[2] + r * y[0]

    grid = _refined_grid(b.mesh, 0.0, t_max)
    return _sign_change_root(D, grid, D(grid))


def riccati_rhs(coeffs: QuadraticCoefficients, t, alpha, beta, gamma, delta, epsilon, kappa):
    """Right-hand sides of the phase equations; returns the six derivatives."""
    a, b, c = coeffs.a(t), coeffs.b(t), coeffs.c(t)
    f, g = coeffs.f(t), coeffs.g(t)
    w = c + 4.0 * a * alpha
    return (
        -(b + 2.0 * c * alpha + 4.0 * a * alpha**2),
        -w * beta,
        -a * beta**2,
        -w * delta + f + 2.0 * alpha * g,
        (g - 2.0 * a * delta) * beta,
        g * delta - a * delta**2,
    )


def continuity_defect(kernels: PhaseKernels, init: PhaseState, t: float = 1e-5) -> dict:
    """|X(t) - X(0) - t X'(0)| for each phase function X, using the ODE for X'(0)."""
    st = propagate(kernels, init, t)
    names = ("alpha", "beta", "gamma", "delta", "epsilon", "kappa")
    x0 = [getattr(init, n) for n in names]
    rates = riccati_rhs(kernels.coeffs, 0.0, *x0)
    return {n: abs(getattr(st, n) - x - t * r) for n, x, r in zip(names, x0, rates)}


def sample_trajectory(kernels: PhaseKernels, init: PhaseState, t0: float, t1: float, n: int,
                      g0: float = 0.0) -> PhaseState:
    """Propagate onto n uniform times in [t0, t1]."""
    return propagate(kernels, init, np.linspace(t0, t1, n), g0=g0)


def _d4(y, h):
    """Fourth-order first derivative on a uniform grid (one-sided 5-point ends)."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 5:
        raise DiagnosticsError("need at least 5 samples for fourth-order differentiation")
    d = np.empty(n)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    return d


@dataclass(frozen=True)
class RiccatiReport:
    absolute: dict
    scale: dict
    relative: dict
    truncation: dict
    tol: float

    @property
    def max_relative(self) -> float:
        return max(self.relative.values())

    @property
    def passed(self) -> bool:
        return self.max_relative < self.tol


def riccati_residuals(states: PhaseState, coeffs: QuadraticCoefficients, tol: float = 1e-6) -> RiccatiReport:
    """Finite-difference residuals of the six phase equations on a uniform time grid.

    Each residual is reported relative to the largest term of its equation.
    An equation whose terms all sit within 1e3 of the stencil's rounding level
    (e.g. alpha identically zero) is measured against the largest scale of the
    whole system instead.
    The truncation error is estimated by repeating the differentiation on the
    every-other-point subgrid; if that estimate exceeds ``tol`` relative the
    grid is declared too coarse.
    """
    t = np.asarray(states.t, dtype=float)
    if t.ndim != 1 or t.size < 9:
        raise DiagnosticsError("riccati_residuals needs at least 9 uniformly spaced samples")
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0.0):
        raise DiagnosticsError("trajectory must be sampled on a uniform grid")
    a, b, c = coeffs.a(t), coeffs.b(t), coeffs.c(t)
    f, g = coeffs.f(t), coeffs.g(t)
    al, be, ga = (np.asarray(getattr(states, n), dtype=float) for n in ("alpha", "beta", "gamma"))
    de, ep, ka = (np.broadcast_to(np.asarray(getattr(states, n), dtype=float), t.shape)
                  for n in ("delta", "epsilon", "kappa"))
    series = {"alpha": al, "beta": be, "gamma": ga, "delta": de, "epsilon": ep, "kappa": ka}
    deriv = {k: _d4(v, h) for k, v in series.items()}
    coarse = {k: np.interp(t, t[::2], _d4(v[::2], 2 * h)) for k, v in series.items()}
    terms = {
        "alpha": [deriv["alpha"], b, 2 * c * al, 4 * a * al**2],
        "beta": [deriv["beta"], c * be, 4 * a * al * be],
        "gamma": [deriv["gamma"], a * be**2],
        "delta": [deriv["delta"], c * de, 4 * a * al * de, -f, -2 * al * g],
        "epsilon": [deriv["epsilon"], -g * be, 2 * a * de * be],
        "kappa": [deriv["kappa"], -g * de, a * de**2],
    }
    absolute, scale, relative, trunc = {}, {}, {}, {}
    terms = {k: [np.broadcast_to(p, t.shape) for p in v] for k, v in terms.items()}
    system = max(float(np.max(np.abs(p))) for v in terms.values() for p in v)
    noise = 1e3 * np.finfo(float).eps * max(float(np.max(np.abs(v))) for v in series.values()) / h
    for name, parts in terms.items():
        res = np.abs(sum(parts))
        sc = max(float(np.max(np.abs(p))) for p in parts)
        if sc < noise:
            sc = max(system, noise)
        # anything under the stencil's rounding floor is unresolvable, not an error
        absolute[name] = float(np.max(res)) if np.max(res) > noise else 0.0
        scale[name] = sc
        relative[name] = absolute[name] / sc if sc > 0 else absolute[name]
        # subgrid derivative error is ~16x the fine-grid error for a fourth-order stencil
        est = float(np.max(np.abs(coarse[name][::2] - deriv[name][::2]))) / 15.0
        est = est if est > noise else 0.0
        trunc[name] = est / sc if sc > 0 else est
    if max(trunc.values()) > tol:
        worst = max(trunc, key=trunc.get)
        raise DiagnosticsError(
            f"time grid too coarse: estimated truncation error {trunc[worst]:.3g} (relative) in the "
            f"{worst} equation exceeds tolerance {tol:g}"
        )
    return RiccatiReport(absolute, scale, relative, trunc, tol)


def reseeded(kernels: PhaseKernels, state: PhaseState, t_span: float) -> tuple[PhaseKernels, PhaseState]:
    """Kernels restarted at ``state.t`` over a further ``t_span``, with the matching initial state."""
    t1 = float(state.t)
    coeffs = kernels.coeffs.shifted(t1)
    basis = solve_basis(coeffs, t_span)
    init = PhaseState(0.0, state.mu, state.alpha, state.beta, state.gamma, state.delta, state.epsilon,
                      state.kappa, 0.0)
    return PhaseKernels(basis, coeffs), init

