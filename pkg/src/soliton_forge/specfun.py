"""Special functions used by the soliton profiles.

All routines are self-contained (no lookup tables):

* complete elliptic integral of the first kind by the arithmetic-geometric mean,
* Jacobi elliptic functions sn, cn, dn by descending Landen / AGM with
  backward phase recurrence (DLMF 22.20(ii)),
* the Airy function Ai and its derivative by a Maclaurin series near the
  origin, asymptotic expansions for large |x|, and re-centred Taylor series
  of the Airy equation bridging the two.

Every public function takes the elliptic *modulus* k, not the parameter k**2.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "JacobiTriple",
    "complete_elliptic_K",
    "jacobi_elliptic",
    "landen_descend",
    "airy_ai",
    "airy_ai_prime",
    "airy_ai_pair",
    "AIRY_SERIES_RADIUS",
    "AIRY_ASYMPTOTIC_THRESHOLD",
]

_EPS = np.finfo(float).eps


class JacobiTriple(NamedTuple):
    sn: np.ndarray | float
    cn: np.ndarray | float
    dn: np.ndarray | float


def _check_modulus(k: float, allow_one: bool) -> float:
    k = float(k)
    if not math.isfinite(k) or k < 0.0:
        raise DomainError(f"elliptic modulus must be finite and >= 0, got {k!r}")
    if k > 1.0 or (k == 1.0 and not allow_one):
        raise DomainError(
            f"elliptic modulus k={k!r} outside [0, 1)" if not allow_one
            else f"elliptic modulus k={k!r} exceeds 1"
        )
    return k


def _complementary(k: float) -> float:
    # (1-k)(1+k) keeps k' accurate when k is close to 1
    return math.sqrt((1.0 - k) * (1.0 + k))


def _agm(a: float, b: float) -> float:
    for _ in range(64):
        if abs(a - b) <= 4 * _EPS * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def complete_elliptic_K(k: float) -> float:
    """Quarter period K(k) = pi / (2 AGM(1, k')).

    Raises DomainError for k >= 1 (logarithmic singularity) or k < 0.
    """
    k = _check_modulus(k, allow_one=False)
    return math.pi / (2.0 * _agm(1.0, _complementary(k)))


def landen_descend(k: float) -> float:
    """Descending Landen modulus k1 = (1 - k') / (1 + k')."""
    k = _check_modulus(k, allow_one=True)
    kp = _complementary(k)
    return (1.0 - kp) / (1.0 + kp)


def _agm_sequences(k: float):
    kp = _complementary(k)
    a = [1.0]
    c = [k]
    b = kp
    while abs(c[-1]) > _EPS * a[-1] and len(a) < 64:
        an = 0.5 * (a[-1] + b)
        cn = 0.5 * (a[-1] - b)
        b = math.sqrt(a[-1] * b)
        a.append(an)
        c.append(cn)
    return a, c


def jacobi_elliptic(u, k: float) -> JacobiTriple:
    """Jacobi elliptic functions (sn, cn, dn) at real argument ``u``.

    ``u`` may be a scalar or an array; ``k`` is a scalar modulus in [0, 1].
    """
    k = _check_modulus(k, allow_one=True)
    u_arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u_arr)):
        raise DomainError("jacobi_elliptic: argument u must be finite")
    scalar = u_arr.ndim == 0
    u_arr = np.atleast_1d(u_arr)

    if k == 0.0:
        sn, cn, dn = np.sin(u_arr), np.cos(u_arr), np.ones_like(u_arr)
    elif k == 1.0:
        sn = np.tanh(u_arr)
        cn = 1.0 / np.cosh(u_arr)
        dn = cn.copy()
    else:
        period = 4.0 * complete_elliptic_K(k)
        ur = u_arr - period * np.round(u_arr / period)
        a, c = _agm_sequences(k)
        n = len(a) - 1
        phi = (2.0**n) * a[n] * ur
        for j in range(n, 0, -1):
            phi = 0.5 * (phi + np.arcsin(c[j] / a[j] * np.sin(phi)))
        sn = np.sin(phi)
        cn = np.cos(phi)
        # dn**2 = k'**2 + k**2 cn**2 stays well conditioned at the quarter period
        kp2 = (1.0 - k) * (1.0 + k)
        dn = np.sqrt(kp2 + k * k * cn * cn)

    if scalar:
        return JacobiTriple(float(sn[0]), float(cn[0]), float(dn[0]))
    return JacobiTriple(sn, cn, dn)


# --------------------------------------------------------------------------
# Airy function

AIRY_SERIES_RADIUS = 2.0
"""|x| at or below which the Maclaurin series about 0 is summed directly."""

AIRY_ASYMPTOTIC_THRESHOLD = 8.0
"""|x| at or above which the large-argument asymptotic expansions are used.

At |x| = 8 the smallest asymptotic term is ~exp(-4|x|^1.5/3) ~ 1e-13
relative; the sweep in tests/test_specfun.py validates the choice.
"""

_BRIDGE_STEP = 1.0

_AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
_AIP0 = -1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))


def _asymptotic_coefficients(nmax: int = 60):
    u = [1.0]
    for j in range(1, nmax):
        u.append(u[-1] * (6 * j - 5) * (6 * j - 3) * (6 * j - 1) / ((2 * j - 1) * 216.0 * j))
    v = [1.0] + [-(6 * j + 1) / (6 * j - 1) * u[j] for j in range(1, nmax)]
    return u, v


_U, _V = _asymptotic_coefficients()


def _taylor_step(x0: float, w: float, wp: float, h: float):
    """Advance (w, w') of w'' = x w from x0 to x0 + h by its Taylor series."""
    c_prev2, c_prev1, c_cur = w, wp, 0.5 * x0 * w  # c0, c1, c2
    val = w + wp * h + c_cur * h * h
    der = wp + 2.0 * c_cur * h
    hp = h * h  # h**n for n = 2
    coeffs = [c_prev2, c_prev1, c_cur]
    small = 0
    for n in range(1, 400):
        # c_{n+2} (n+1)(n+2) = x0 c_n + c_{n-1}
        c_new = (x0 * coeffs[n] + coeffs[n - 1]) / ((n + 1) * (n + 2))
        coeffs.append(c_new)
        hp_next = hp * h
        term = c_new * hp_next
        dterm = (n + 2) * c_new * hp
        val += term
        der += dterm
        hp = hp_next
        scale = abs(val) + abs(der) + 1e-300
        if abs(term) + abs(dterm) < 1e-18 * scale:
            small += 1
            if small >= 3:
                break
        else:
            small = 0
    return val, der


def _asymptotic_positive(x: float):
    zeta = 2.0 / 3.0 * x**1.5
    s_u = 0.0
    s_v = 0.0
    last = math.inf
    for j in range(len(_U)):
        term = _U[j] / zeta**j
        if term > last:
            break
        sign = -1.0 if j % 2 else 1.0
        s_u += sign * term
        s_v += sign * _V[j] / zeta**j
        last = term
        if term < 1e-18:
            break
    pref = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    return pref * s_u / x**0.25, -pref * x**0.25 * s_v


def _asymptotic_negative(x: float):
    # x > 0, evaluates Ai(-x), Ai'(-x)
    zeta = 2.0 / 3.0 * x**1.5
    p_u = q_u = p_v = q_v = 0.0
    last = math.inf
    for j in range(len(_U)):
        term = _U[j] / zeta**j
        if term > last:
            break
        half = j // 2
        sign = -1.0 if half % 2 else 1.0
        if j % 2 == 0:
            p_u += sign * term
            p_v += sign * _V[j] / zeta**j
        else:
            q_u += sign * term
            q_v += sign * _V[j] / zeta**j
        last = term
        if term < 1e-18:
            break
    theta = zeta - math.pi / 4.0
    ct, st = math.cos(theta), math.sin(theta)
    ai = (ct * p_u + st * q_u) / (math.sqrt(math.pi) * x**0.25)
    aip = x**0.25 / math.sqrt(math.pi) * (st * p_v - ct * q_v)
    return ai, aip


def _airy_scalar(x: float):
    if not math.isfinite(x):
        raise DomainError(f"airy_ai: non-finite argument {x!r}")
    ax = abs(x)
    if ax <= AIRY_SERIES_RADIUS:
        return _taylor_step(0.0, _AI0, _AIP0, x)
    if ax >= AIRY_ASYMPTOTIC_THRESHOLD:
        return _asymptotic_positive(x) if x > 0 else _asymptotic_negative(-x)
    # bridge: start at the asymptotic edge on the same side and walk inward
    x0 = math.copysign(AIRY_ASYMPTOTIC_THRESHOLD, x)
    w, wp = _asymptotic_positive(x0) if x0 > 0 else _asymptotic_negative(-x0)
    nsteps = max(1, math.ceil(abs(x - x0) / _BRIDGE_STEP))
    h = (x - x0) / nsteps
    for i in range(nsteps):
        w, wp = _taylor_step(x0 + i * h, w, wp, h)
    return w, wp


def airy_ai_pair(x):
    """Return (Ai(x), Ai'(x)); scalar in, scalars out; array in, arrays out."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return _airy_scalar(float(arr))
    flat = arr.ravel()
    out = np.empty((2, flat.size))
    for i, xi in enumerate(flat):
        out[:, i] = _airy_scalar(float(xi))
    return out[0].reshape(arr.shape), out[1].reshape(arr.shape)


def airy_ai(x):
    """Airy function Ai(x) for real x."""
    return airy_ai_pair(x)[0]


def airy_ai_prime(x):
    """Derivative Ai'(x) for real x."""
    return airy_ai_pair(x)[1]
