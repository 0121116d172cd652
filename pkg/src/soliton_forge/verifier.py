"""Independent numerical checks of a candidate solution.

Two oracles that never look at the kernel formulas:

* ``pde_residual`` plugs a pointwise sampler into the equation
  i psi_t = -a psi_xx + b x**2 psi - i c x psi_x - i d psi - f x psi
            + i g psi_x + G psi + h |psi|**2 psi
  using fourth-order stencils whose step is refined until the truncation
  estimate is negligible;
* ``split_step_propagate`` evolves initial data with a Strang-split Fourier
  method on a periodic box.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .characteristic import QuadraticCoefficients
from .errors import DegenerateNormError, DiagnosticsError, DomainError, ResolutionError, UnsupportedRegimeError

__all__ = [
    "GridSpec",
    "FieldGrid",
    "ResidualReport",
    "SimpleLaws",
    "pde_residual",
    "split_step_propagate",
    "l2_relative_error",
    "l2_norm",
    "write_field_csv",
    "read_field_csv",
    "FIELD_CSV_HEADER",
]

FIELD_CSV_HEADER = "t x re im abs2"
_ALIAS_LIMIT = 1e-6
_EDGE_LIMIT = 1e-8


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic box [-L, L) with N nodes and a list of sample times."""

    L: float
    N: int
    t_nodes: np.ndarray

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError("box half-width L must be positive")
        if self.N < 64 or not _is_pow2(self.N):
            raise DomainError(f"grid size N must be a power of two >= 64, got {self.N}")
        object.__setattr__(self, "t_nodes", np.atleast_1d(np.asarray(self.t_nodes, dtype=float)))

    @classmethod
    def uniform(cls, L: float, N: int, t0: float, t1: float, nt: int) -> "GridSpec":
        return cls(float(L), int(N), np.linspace(t0, t1, nt))

    @property
    def x_nodes(self) -> np.ndarray:
        return -self.L + 2.0 * self.L * np.arange(self.N) / self.N

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N


@dataclass(frozen=True)
class FieldGrid:
    """Complex field sampled on (t, x); ``values`` is time-major (nt, N)."""

    x_nodes: np.ndarray
    t_nodes: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[None, :]
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "x_nodes", np.asarray(self.x_nodes, dtype=float))
        object.__setattr__(self, "t_nodes", np.atleast_1d(np.asarray(self.t_nodes, dtype=float)))
        if v.shape != (self.t_nodes.size, self.x_nodes.size):
            raise DomainError(f"field shape {v.shape} does not match (nt, N)=({self.t_nodes.size}, {self.x_nodes.size})")

    @classmethod
    def sample(cls, psi: Callable, spec: GridSpec) -> "FieldGrid":
        x, t = spec.x_nodes, spec.t_nodes
        return cls(x, t, np.asarray(psi(x[None, :], t[:, None]), dtype=complex))

    @property
    def dx(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])

    def at(self, i: int) -> np.ndarray:
        return self.values[i]

    def edge_ratio(self) -> float:
        """Largest edge magnitude relative to the field maximum."""
        mx = float(np.max(np.abs(self.values)))
        if mx == 0.0:
            return 0.0
        return float(np.max(np.abs(self.values[:, [0, -1]]))) / mx


@dataclass(frozen=True)
class SimpleLaws:
    """Explicit nonlinearity and forcing laws (h(t), G(x, t))."""

    h: Callable = lambda t: 0.0 * np.asarray(t, dtype=float)
    forcing: Callable | None = None

    def h_of_t(self, t):
        return self.h(t)

    def pde_forcing(self, x, t):
        if self.forcing is None:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)
        return self.forcing(x, t)


@dataclass(frozen=True)
class ResidualReport:
    max_abs: float
    rel_to_scale: float
    worst_point: tuple
    stencil_orders: tuple
    h_x: float
    h_t: float
    truncation_estimate: float
    scale: float
    refinements: int

    def passed(self, tol: float) -> bool:
        return self.rel_to_scale < tol


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SOLITON_FORGE_THREADS", "1")))
    except ValueError:
        return 1


def _residual_field(psi, coeffs, laws, x, t, hx, ht, interior):
    X = x[None, :]
    Tm = t[:, None]
    p0 = psi(X, Tm)
    pxm2, pxm1 = psi(X - 2 * hx, Tm), psi(X - hx, Tm)
    pxp1, pxp2 = psi(X + hx, Tm), psi(X + 2 * hx, Tm)
    psi_x = (pxm2 - 8 * pxm1 + 8 * pxp1 - pxp2) / (12 * hx)
    psi_xx = (-pxm2 + 16 * pxm1 - 30 * p0 + 16 * pxp1 - pxp2) / (12 * hx * hx)
    central = t - 2 * ht >= 0.0
    psi_t = np.empty_like(p0)
    if np.any(central):
        tc = t[central][:, None]
        psi_t[central] = (psi(X, tc - 2 * ht) - 8 * psi(X, tc - ht) + 8 * psi(X, tc + ht)
                          - psi(X, tc + 2 * ht)) / (12 * ht)
    if np.any(~central):
        tf = t[~central][:, None]
        psi_t[~central] = (-25 * p0[~central] + 48 * psi(X, tf + ht) - 36 * psi(X, tf + 2 * ht)
                           + 16 * psi(X, tf + 3 * ht) - 3 * psi(X, tf + 4 * ht)) / (12 * ht)
    a, b, c = coeffs.a(t)[:, None], coeffs.b(t)[:, None], coeffs.c(t)[:, None]
    d, f, g = coeffs.d(t)[:, None], coeffs.f(t)[:, None], coeffs.g(t)[:, None]
    h = np.asarray(laws.h_of_t(t), dtype=float).reshape(-1, 1)
    G = np.broadcast_to(laws.pde_forcing(X, Tm), p0.shape)
    terms = [
        1j * psi_t,
        a * psi_xx,
        -b * X * X * p0,
        1j * c * X * psi_x,
        1j * d * p0,
        f * X * p0,
        -1j * g * psi_x,
        -G * p0,
        -h * np.abs(p0) ** 2 * p0,
    ]
    res = sum(terms)
    mask = np.broadcast_to(interior[None, :], p0.shape)
    scale = max(float(np.max(np.abs(np.where(mask, np.broadcast_to(tm, p0.shape), 0.0)))) for tm in terms)
    return np.where(mask, res, 0.0), scale


def pde_residual(psi: Callable, coeffs: QuadraticCoefficients, laws, grid: GridSpec, tol: float = 1e-6,
                 h_x: float = 1e-2, h_t: float = 1e-3, max_refinements: int = 5,
                 exclude_fraction: float = 0.0) -> ResidualReport:
    """Pointwise residual of the equation for the sampler ``psi(x, t)`` on ``grid``.

    Derivatives use fourth-order stencils with steps (h_x, h_t) independent of
    the grid spacing.  Steps are halved until the change in the residual field
    (a truncation estimate) is below 0.1 * tol of the term scale.
    ``exclude_fraction`` drops the outer part of the box (tapered regions).
    """
    x, t = grid.x_nodes, grid.t_nodes
    interior = np.abs(x) <= (1.0 - exclude_fraction) * grid.L + 1e-12
    coeffs.check_time(t)
    r_prev, scale = _residual_field(psi, coeffs, laws, x, t, h_x, h_t, interior)
    for level in range(1, max_refinements + 1):
        h_x, h_t = 0.5 * h_x, 0.5 * h_t
        r_new, scale = _residual_field(psi, coeffs, laws, x, t, h_x, h_t, interior)
        est = float(np.max(np.abs(r_new - r_prev)))
        if scale == 0.0 or est <= 0.1 * tol * scale:
            mag = np.abs(r_new)
            i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
            mx = float(mag[i, j])
            return ResidualReport(mx, mx / scale if scale else mx, (float(x[j]), float(t[i])), (4, 4),
                                  h_x, h_t, est, scale, level)
        r_prev = r_new
    raise DiagnosticsError(
        f"PDE residual did not settle after {max_refinements} refinements "
        f"(last truncation estimate {est:.3g} vs scale {scale:.3g})"
    )


def l2_norm(values, dx: float) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * dx))


def l2_relative_error(field_a, field_b) -> float:
    """||A - B||_2 / ||B||_2 over x at one time."""
    a = np.asarray(field_a, dtype=complex)
    b = np.asarray(field_b, dtype=complex)
    if a.shape != b.shape:
        raise DomainError(f"grids do not match: {a.shape} vs {b.shape}")
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        raise DegenerateNormError("reference field has zero norm")
    return float(np.linalg.norm(a - b)) / nb


def _cumulative(fun, t0, t1):
    """Dense antiderivative of fun on [t0, t1], zero at t0."""
    if t1 <= t0:
        return lambda s: np.zeros_like(np.asarray(s, dtype=float))
    sol = solve_ivp(lambda s, y: [fun(s)], (t0, t1), [0.0], method="DOP853", rtol=1e-12, atol=1e-14,
                    dense_output=True)
    return lambda s: sol.sol(np.asarray(s, dtype=float))[0]


def _taper(x, L, fraction):
    """Smooth window: 1 inside (1 - fraction) L, cos**2 ramp to 0 at the edges."""
    inner = (1.0 - fraction) * L
    w = np.ones_like(x)
    ramp = np.abs(x) > inner
    s = (np.abs(x[ramp]) - inner) / (L - inner)
    w[ramp] = np.cos(0.5 * math.pi * np.clip(s, 0.0, 1.0)) ** 2
    return w


def _high_band_fraction(chi):
    spec = np.abs(np.fft.fft(chi)) ** 2
    total = float(np.sum(spec))
    if total == 0.0:
        return 0.0
    k = np.abs(np.fft.fftfreq(chi.size))
    return float(np.sum(spec[k > 1.0 / 3.0])) / total


def split_step_propagate(psi0: FieldGrid, coeffs: QuadraticCoefficients, laws, t_end: float, dt: float,
                         store_times=None, taper: float = 0.0, check_aliasing: bool = True) -> FieldGrid:
    """Strang split-step Fourier evolution of ``psi0`` (a single time row) up to ``t_end``.

    The d term is removed by the gauge psi = chi exp(-Lambda), Lambda = int d,
    which turns h into h exp(-2 Lambda).  Potential half steps sample the
    coefficients at the midpoint of each half step, the dispersive step at the
    midpoint of the full step.  The dilation term c is not supported.
    """
    if psi0.values.shape[0] != 1:
        raise DomainError("psi0 must hold exactly one time row")
    if not coeffs.c.is_zero:
        raise UnsupportedRegimeError("split-step propagation does not support the dilation term c")
    x = psi0.x_nodes
    N = x.size
    if N < 64 or not _is_pow2(N):
        raise DomainError(f"grid size must be a power of two >= 64, got {N}")
    dx = float(x[1] - x[0])
    L = 0.5 * N * dx
    t0 = float(psi0.t_nodes[0])
    span = float(t_end) - t0
    if not (span > 0 and dt > 0):
        raise DomainError("need t_end > t0 and dt > 0")
    nsteps = max(1, int(round(span / dt)))
    dt = span / nsteps
    coeffs.check_time([t0, t_end])

    k = 2.0 * math.pi * np.fft.fftfreq(N, d=dx)
    k2 = k * k
    t_half = t0 + dt * (np.arange(nsteps) + 0.5)
    t_q1 = t0 + dt * (np.arange(nsteps) + 0.25)
    t_q3 = t0 + dt * (np.arange(nsteps) + 0.75)
    a_mid = np.broadcast_to(coeffs.a(t_half), t_half.shape)
    g_mid = np.broadcast_to(coeffs.g(t_half), t_half.shape)
    if float(np.max(np.abs(a_mid))) * dt * float(np.max(k2)) >= math.pi:
        raise DomainError(
            f"stability guard: dt * max|a| * k_max**2 = {float(np.max(np.abs(a_mid))) * dt * float(np.max(k2)):.3g} >= pi"
        )

    if coeffs.d.is_zero:
        Lam = lambda s: np.zeros_like(np.asarray(s, dtype=float))  # noqa: E731
    else:
        Lam = _cumulative(coeffs.d, 0.0, float(t_end))

    def potential_phase(tq):
        b, f = coeffs.b(tq), coeffs.f(tq)
        h = np.asarray(laws.h_of_t(tq), dtype=float)
        lam2 = np.exp(-2.0 * Lam(tq))
        return b, f, h * lam2

    pq1 = [np.broadcast_to(v, t_q1.shape) for v in potential_phase(t_q1)]
    pq3 = [np.broadcast_to(v, t_q3.shape) for v in potential_phase(t_q3)]

    chi = psi0.values[0].copy()
    if taper > 0.0:
        chi = chi * _taper(x, L, taper)
    elif np.max(np.abs(chi)) > 0 and max(abs(chi[0]), abs(chi[-1])) >= _EDGE_LIMIT * np.max(np.abs(chi)):
        raise ResolutionError("initial field does not decay to the box edges; enlarge L or use a taper")
    chi = chi * np.exp(Lam(t0))
    if check_aliasing and _high_band_fraction(chi) > _ALIAS_LIMIT:
        raise ResolutionError("initial field under-resolved: top-third spectral energy above 1e-6")

    store = [] if store_times is None else sorted(float(s) for s in store_times)
    store_steps = {int(round((s - t0) / dt)): s for s in store if t0 < s <= t_end + 1e-12}
    times, rows, norms = [t0], [chi * np.exp(-Lam(t0))], [l2_norm(chi, dx)]
    forcing_zero = (isinstance(laws, SimpleLaws) and laws.forcing is None) or (
        getattr(laws, "m", None) == 0 and getattr(laws, "absorbed", False)
    )

    def half_kick(chi, i, table, tq):
        b, f, h = table[0][i], table[1][i], table[2][i]
        V = b * x * x - f * x + h * np.abs(chi) ** 2
        if not forcing_zero:
            V = V + np.asarray(laws.pde_forcing(x, tq), dtype=float)
        return chi * np.exp(-0.5j * dt * V)

    for i in range(nsteps):
        chi = half_kick(chi, i, pq1, t_q1[i])
        chi = np.fft.ifft(np.exp(-1j * dt * (a_mid[i] * k2 - g_mid[i] * k)) * np.fft.fft(chi))
        chi = half_kick(chi, i, pq3, t_q3[i])
        step = i + 1
        if step in store_steps or step == nsteps:
            tn = t0 + step * dt
            if not np.all(np.isfinite(chi)):
                raise ResolutionError(f"split-step field became non-finite at t={tn}")
            if check_aliasing and _high_band_fraction(chi) > _ALIAS_LIMIT:
                raise ResolutionError(f"aliasing detected at t={tn:.6g}: top-third spectral energy above 1e-6")
            times.append(tn)
            rows.append(chi * np.exp(-Lam(tn)))
            norms.append(l2_norm(chi, dx))
    meta = {"dt": dt, "steps": nsteps, "gauged_norms": norms, "threads": _threads(), "taper": taper}
    return FieldGrid(x, np.array(times), np.array(rows), meta)


def write_field_csv(path, grid: FieldGrid) -> None:
    """Columnar text: header ``t x re im abs2``, rows sorted by (t, x), 17 significant digits."""
    order = np.argsort(grid.t_nodes, kind="stable")
    T, X = np.meshgrid(grid.t_nodes[order], grid.x_nodes, indexing="ij")
    V = grid.values[order]
    data = np.column_stack([T.ravel(), X.ravel(), V.real.ravel(), V.imag.ravel(), (np.abs(V) ** 2).ravel()])
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, data, fmt="%.16e", delimiter=" ", header=FIELD_CSV_HEADER, comments="")


def read_field_csv(path) -> FieldGrid:
    data = np.loadtxt(path, skiprows=1, ndmin=2)
    t_nodes = np.unique(data[:, 0])
    x_nodes = data[data[:, 0] == t_nodes[0], 1]
    values = (data[:, 2] + 1j * data[:, 3]).reshape(t_nodes.size, x_nodes.size)
    return FieldGrid(x_nodes, t_nodes, values)
