"""Travelling-wave profiles F(z) solving F'' = g0 z**m F + h0 F**3.

m = 0 is integrated once to (F')**2 = C0 + g0 F**2 + h0 F**4 / 2 and solved
with Jacobi elliptic functions (general cn and sn waves, and their
hyperbolic limits: the bright sech and dark tanh solitons).  m = 1 reduces to
Painleve II, w'' = zeta w + 2 w**3, whose bounded "nonlinear Airy" solutions
are integrated numerically from their k Ai(zeta) tail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import loggamma

from .errors import DomainError, NumericalFailureError, RangeError, UnsupportedRegimeError
from .specfun import airy_ai_pair, jacobi_elliptic

__all__ = [
    "ProfileKind",
    "SolitonProfile",
    "Painleve2Solution",
    "build_profile_m0",
    "build_profile_m1",
    "profile_eval",
    "first_integral",
    "solve_painleve2",
    "PAINLEVE_SEED_DEFAULT",
]

PAINLEVE_SEED_DEFAULT = 12.0
_PAINLEVE_GUARD = 1e3
# Ai(zeta) underflows to zero beyond this point
_AIRY_NEGLIGIBLE = 100.0
# relative closeness at which C0 is treated as the bright/dark degenerate value
_DEGENERATE_RTOL = 1e-14


class ProfileKind(str, enum.Enum):
    GENERAL_CN = "GeneralCn"
    GENERAL_SN = "GeneralSn"
    BRIGHT = "Bright"
    DARK = "Dark"
    PAINLEVE_II = "PainleveII"


@dataclass(frozen=True)
class Painleve2Solution:
    """Bounded real Painleve II solution A_k with its asymptotic data.

    r**2 = -ln(1 - k**2)/pi and theta0 describe the oscillatory tail
    w ~ r |zeta|**(-1/4) sin(s(zeta) - theta0) as zeta -> -infinity.
    """

    k: float
    zeta_min: float
    zeta_max: float
    r: float
    theta0: float
    _dense: Callable = field(repr=False, compare=False)

    def __call__(self, zeta):
        """Return (w, w') at zeta (scalar or array).

        Right of the seed point the solution is k Ai(zeta) up to a relative
        correction of order k**2 Ai(zeta)**2, so the Airy tail is used there.
        """
        z = np.asarray(zeta, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.zeta_min))
        if np.any(z < self.zeta_min - tol) or not np.all(np.isfinite(z)):
            raise RangeError(f"zeta below the integrated Painleve II range (min {self.zeta_min})")
        flat = z.ravel()
        w = np.zeros_like(flat)
        wp = np.zeros_like(flat)
        inner = flat <= self.zeta_max
        if np.any(inner):
            y = self._dense(np.maximum(flat[inner], self.zeta_min))
            w[inner], wp[inner] = y[0], y[1]
        tail = (~inner) & (flat < _AIRY_NEGLIGIBLE)
        if np.any(tail):
            ai, aip = airy_ai_pair(flat[tail])
            w[tail], wp[tail] = self.k * ai, self.k * aip
        if z.ndim == 0:
            return float(w[0]), float(wp[0])
        return w.reshape(z.shape), wp.reshape(z.shape)

    def s(self, zeta):
        """Asymptotic phase s(zeta) = 2/3 |zeta|**1.5 - 3/4 r**2 ln|zeta|."""
        az = np.abs(np.asarray(zeta, dtype=float))
        return 2.0 / 3.0 * az**1.5 - 0.75 * self.r**2 * np.log(az)

    def ds(self, zeta):
        """d s / d|zeta|."""
        az = np.abs(np.asarray(zeta, dtype=float))
        return np.sqrt(az) - 0.75 * self.r**2 / az

    def asymptotic(self, zeta):
        """Leading oscillatory asymptote r |zeta|**(-1/4) sin(s - theta0), zeta < 0."""
        az = np.abs(np.asarray(zeta, dtype=float))
        return self.r * az**-0.25 * np.sin(self.s(zeta) - self.theta0)


def _theta0(k: float, r2: float) -> float:
    return 1.5 * r2 * math.log(2.0) + float(np.imag(loggamma(1.0 - 0.5j * r2))) + 0.25 * math.pi * (
        1.0 - 2.0 * math.copysign(1.0, k)
    )


def solve_painleve2(k: float, zeta_min: float = -40.0, zeta_max: float = PAINLEVE_SEED_DEFAULT,
                    rtol: float = 1e-12) -> Painleve2Solution:
    """Integrate w'' = zeta w + 2 w**3 leftward from the Airy tail k Ai(zeta)."""
    k = float(k)
    if not (0.0 < abs(k) < 1.0):
        raise DomainError(f"Painleve II parameter must satisfy 0 < |k| < 1, got {k!r}")
    if zeta_max < 8.0:
        raise DomainError("zeta_max must be >= 8 so the Airy tail seeds the solution")
    if zeta_min < -40.0 or zeta_min >= zeta_max:
        raise DomainError("zeta_min must lie in [-40, zeta_max)")
    ai, aip = airy_ai_pair(zeta_max)
    y0 = np.array([k * ai, k * aip])

    def rhs(z, y):
        return np.array([y[1], z * y[0] + 2.0 * y[0] ** 3])

    def blowup(z, y):
        return _PAINLEVE_GUARD - abs(y[0])

    blowup.terminal = True
    # absolute tolerance far below the seed amplitude keeps the tail relatively accurate
    sol = solve_ivp(rhs, (zeta_max, zeta_min), y0, method="DOP853", rtol=rtol,
                    atol=1e-30, dense_output=True, events=blowup)
    if sol.status != 0 or sol.t_events[0].size:
        raise NumericalFailureError(
            f"Painleve II integration left the bounded family (k={k}): {sol.message}"
        )
    r2 = -math.log1p(-k * k) / math.pi
    return Painleve2Solution(
        k=k, zeta_min=float(zeta_min), zeta_max=float(zeta_max), r=math.sqrt(r2),
        theta0=_theta0(k, r2), _dense=sol.sol,
    )


@dataclass(frozen=True)
class SolitonProfile:
    """Profile data (m, g0, h0, C0, kind) plus the derived closed-form constants.

    For elliptic kinds F(z) = amplitude * jac(omega z, modulus); for the
    Painleve kind F(z) = scale sqrt(2/h0) w(scale z) with scale**3 = g0.
    """

    m: int
    g0: float
    h0: float
    C0: float
    kind: ProfileKind
    amplitude: float
    omega: float
    modulus: float = 1.0
    k_p2: float | None = None
    painleve: Painleve2Solution | None = field(default=None, repr=False, compare=False)

    def __call__(self, z):
        return profile_eval(self, z)

    @property
    def zeta_scale(self) -> float:
        return float(np.cbrt(self.g0))

    def z_range(self):
        """Admissible travelling-argument range (finite only for Painleve profiles)."""
        if self.kind is not ProfileKind.PAINLEVE_II:
            return (-math.inf, math.inf)
        lo = self.painleve.zeta_min / self.zeta_scale
        return (lo, math.inf) if self.zeta_scale > 0 else (-math.inf, lo)

    def describe(self) -> dict:
        out = {"m": self.m, "g0": self.g0, "h0": self.h0, "kind": self.kind.value}
        if self.m == 0:
            out["C0"] = self.C0
        else:
            out.update(k=self.k_p2, zeta_min=self.painleve.zeta_min, zeta_max=self.painleve.zeta_max)
        return out


def build_profile_m0(g0: float, h0: float, C0: float) -> SolitonProfile:
    """Select and build the elliptic/hyperbolic profile for (g0, h0, C0)."""
    g0, h0, C0 = float(g0), float(h0), float(C0)
    if not all(math.isfinite(v) for v in (g0, h0, C0)):
        raise DomainError("profile parameters must be finite")
    disc = g0 * g0 - 2.0 * C0 * h0
    scale = max(abs(C0), g0 * g0 / max(abs(h0), 1e-300), 1e-300)

    if h0 < 0.0 and g0 > 0.0 and abs(C0) <= _DEGENERATE_RTOL * scale:
        return SolitonProfile(0, g0, h0, 0.0, ProfileKind.BRIGHT,
                              amplitude=math.sqrt(2.0 * g0 / -h0), omega=math.sqrt(g0))
    if g0 < 0.0 and h0 > 0.0 and abs(C0 - g0 * g0 / (2.0 * h0)) <= _DEGENERATE_RTOL * scale:
        return SolitonProfile(0, g0, h0, g0 * g0 / (2.0 * h0), ProfileKind.DARK,
                              amplitude=math.sqrt(-g0 / h0), omega=math.sqrt(-g0 / 2.0))
    if h0 < 0.0:
        if C0 <= 0.0:
            raise UnsupportedRegimeError(
                f"cn profile needs C0 > 0 for h0 < 0 (modulus in (0,1)); got C0={C0}"
                if disc > 0 else f"cn profile needs g0**2 - 2 C0 h0 > 0; got {disc}"
            )
        root = math.sqrt(disc)
        k2 = (g0 + root) / (2.0 * root)
        return SolitonProfile(0, g0, h0, C0, ProfileKind.GENERAL_CN,
                              amplitude=math.sqrt((g0 + root) / -h0), omega=math.sqrt(root),
                              modulus=math.sqrt(k2))
    if g0 < 0.0 and h0 > 0.0:
        if not disc > 0.0:
            raise UnsupportedRegimeError(f"sn profile needs g0**2 - 2 C0 h0 > 0; got {disc}")
        if not C0 > 0.0:
            raise UnsupportedRegimeError(f"sn profile needs C0 > 0; got C0={C0}")
        root = math.sqrt(disc)
        small = (-g0 - root) / h0  # squared amplitude, the smaller root of the quartic
        large = (-g0 + root) / h0
        return SolitonProfile(0, g0, h0, C0, ProfileKind.GENERAL_SN,
                              amplitude=math.sqrt(small), omega=math.sqrt(0.5 * h0 * large),
                              modulus=math.sqrt(small / large))
    raise UnsupportedRegimeError(
        "no real bounded elliptic profile: need h0 < 0 (cn/bright) or g0 < 0 < h0 (sn/dark); "
        f"got g0={g0}, h0={h0}, C0={C0}"
    )


def build_profile_m1(g0: float, h0: float, k: float, zeta_min: float = -40.0,
                     zeta_max: float = PAINLEVE_SEED_DEFAULT) -> SolitonProfile:
    """Painleve II profile F(z) = g0**(1/3) sqrt(2/h0) A_k(g0**(1/3) z)."""
    g0, h0 = float(g0), float(h0)
    if not h0 > 0.0:
        raise UnsupportedRegimeError(f"m=1 profile needs h0 > 0 for a real scaling; got h0={h0}")
    if g0 == 0.0:
        raise UnsupportedRegimeError("m=1 profile needs g0 != 0")
    p2 = solve_painleve2(k, zeta_min, zeta_max)
    c = float(np.cbrt(g0))
    return SolitonProfile(1, g0, h0, 0.0, ProfileKind.PAINLEVE_II,
                          amplitude=c * math.sqrt(2.0 / h0), omega=c, k_p2=float(k), painleve=p2)


def profile_eval(p: SolitonProfile, z):
    """Return (F(z), F'(z)); arrays broadcast elementwise."""
    z = np.asarray(z, dtype=float)
    A, w = p.amplitude, p.omega
    kind = p.kind
    if kind is ProfileKind.BRIGHT:
        sech = 1.0 / np.cosh(w * z)
        F = A * sech
        dF = -A * w * sech * np.tanh(w * z)
    elif kind is ProfileKind.DARK:
        th = np.tanh(w * z)
        F = A * th
        dF = A * w * (1.0 - th * th)
    elif kind is ProfileKind.GENERAL_CN:
        sn, cn, dn = jacobi_elliptic(w * z, p.modulus)
        F = A * np.asarray(cn)
        dF = -A * w * np.asarray(sn) * np.asarray(dn)
    elif kind is ProfileKind.GENERAL_SN:
        sn, cn, dn = jacobi_elliptic(w * z, p.modulus)
        F = A * np.asarray(sn)
        dF = A * w * np.asarray(cn) * np.asarray(dn)
    else:
        wv, wp = p.painleve(w * z)
        F = A * np.asarray(wv)
        dF = A * w * np.asarray(wp)
    if z.ndim == 0:
        return float(F), float(dF)
    return F, dF


def first_integral(p: SolitonProfile, z):
    """(F')**2 - g0 F**2 - h0 F**4 / 2, which equals C0 for every z when m = 0."""
    if p.m != 0:
        raise UnsupportedRegimeError("first integral is only defined for m = 0 profiles")
    F, dF = profile_eval(p, z)
    return dF * dF - p.g0 * F * F - 0.5 * p.h0 * F**4
