"""Scalar filter functions and their action as matrix functions of ``h * hat(B)``.

Any real-analytic ``f`` applied to the skew matrix ``Z = s * hat(B)`` reduces to

    f(Z) v = f(0) v + s a1(y) (B x v) + s**2 a2(y) (B x (B x v)),   y = s |B|,

where ``f(iy) = f(0) + i y a1(y) - y**2 a2(y)``. Each filter below supplies its
closed-form ``a1``/``a2``; for ``|y| < COEFF_SWITCH`` the closed forms are
replaced by degree-8 Taylor polynomials generated from exact power series,
which are also what :func:`series_oracle` sums.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import FilterPole, SingularMatrix, ZeroField
from .geom3 import cross, hat_matrix, norm

POLE_TOL = 1e-8
# sinc and tanc have no cancellation and switch late
SERIES_SWITCH = 1e-3
# a1/a2 closed forms cancel like eps_mach / y**2; at 0.05 both the closed form
# and the degree-8 polynomial are accurate to ~1e-13 relative
COEFF_SWITCH = 0.05
_FALLBACK_DEGREE = 8

FILTERS = (
    "exp_neg",
    "psi",
    "phi1",
    "upsilon",
    "varphi1",
    "phi2",
    "sinch",
    "inv_varphi1",
)


@dataclass(frozen=True)
class RodriguezCoeffs:
    """``f(Z) = c0 I + c1 hat(B) + c2 hat(B)**2`` for one fixed ``B``."""

    c0: float
    c1: float
    c2: float

    def apply(self, B, v):
        Bv = cross(B, v)
        out = self.c0 * v if self.c0 != 0.0 else np.zeros(3)
        if self.c1 != 0.0:
            out = out + self.c1 * Bv
        if self.c2 != 0.0:
            out = out + self.c2 * cross(B, Bv)
        return out

    def matrix(self, B):
        H = hat_matrix(B)
        return self.c0 * np.eye(3) + self.c1 * H + self.c2 * (H @ H)


# ---------------------------------------------------------------------------
# scalar functions


def sinc(xi):
    """``sin(xi) / xi`` with the removable singularity at 0 filled in."""
    if abs(xi) < SERIES_SWITCH:
        x2 = xi * xi
        return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    return math.sin(xi) / xi


def tanc(xi):
    """``tan(xi) / xi``; raises :class:`FilterPole` near odd multiples of pi/2."""
    c = math.cos(xi)
    if abs(c) <= POLE_TOL:
        raise FilterPole(f"tanc pole at xi = {xi!r}")
    if abs(xi) < SERIES_SWITCH:
        x2 = xi * xi
        return 1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    return math.tan(xi) / xi


def theta(xi):
    """Position weight ``1 / sinc(xi/2)**2`` for the field evaluation point."""
    s = sinc(0.5 * xi)
    if abs(s) <= POLE_TOL:
        raise FilterPole(f"theta pole at xi = {xi!r}")
    return 1.0 / (s * s)


# ---------------------------------------------------------------------------
# exact power series (coefficients of zeta**n), used for the small-argument
# fallback and by the brute-force oracle


def _series_exp(n, sign=1):
    return [Fraction(sign**k, math.factorial(k)) for k in range(n)]


def _series_sinch(n, half=False):
    # sinh(z)/z, optionally at z/2
    out = [Fraction(0)] * n
    for k in range(0, n, 2):
        out[k] = Fraction(1, math.factorial(k + 1) * (2**k if half else 1))
    return out


def _series_cosh(n, half=False):
    out = [Fraction(0)] * n
    for k in range(0, n, 2):
        out[k] = Fraction(1, math.factorial(k) * (2**k if half else 1))
    return out


def _mul(a, b):
    n = len(a)
    return [sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(n)]


def _recip(a):
    n = len(a)
    out = [Fraction(0)] * n
    out[0] = 1 / a[0]
    for k in range(1, n):
        out[k] = -sum(a[i] * out[k - i] for i in range(1, k + 1)) / a[0]
    return out


@lru_cache(maxsize=None)
def taylor_coefficients(fid, terms):
    """Exact Taylor coefficients ``c_0 .. c_{terms-1}`` of filter ``fid`` in ``zeta``."""
    n = terms + 1
    if fid == "exp_neg":
        c = _series_exp(n, -1)
    elif fid == "varphi1":
        c = [Fraction(1, math.factorial(k + 1)) for k in range(n)]
    elif fid == "inv_varphi1":
        c = _recip([Fraction(1, math.factorial(k + 1)) for k in range(n)])
    elif fid == "sinch":
        c = _series_sinch(n)
    elif fid == "phi1":
        c = _recip(_series_sinch(n))
    elif fid == "upsilon":
        p = _recip(_series_sinch(n + 1))
        c = p[1:]
    elif fid == "psi":
        c = _mul(_series_sinch(n, half=True), _recip(_series_cosh(n, half=True)))
    elif fid == "phi2":
        s = _series_sinch(n, half=True)
        c = _recip(_mul(s, s))
    else:
        raise KeyError(fid)
    return tuple(c[:terms])


@lru_cache(maxsize=None)
def _fallback_polys(fid):
    """Even polynomials in ``y`` for ``a1`` and ``a2`` up to degree 8."""
    c = taylor_coefficients(fid, 2 * _FALLBACK_DEGREE + 6)
    deg = _FALLBACK_DEGREE // 2 + 1
    a1 = [float(c[2 * j + 1] * (-1) ** j) for j in range(deg)]
    a2 = [float(c[2 * j + 2] * (-1) ** j) for j in range(deg)]
    return a1, a2


def _poly_y2(coeffs, y):
    y2 = y * y
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * y2 + c
    return acc


# closed forms of a1(y), a2(y); None means identically zero


def _pole_check_sinc(y, fid):
    if y != 0.0 and abs(math.sin(y) / y) <= POLE_TOL:
        raise FilterPole(f"{fid}: sinc(h|B|) vanishes at h|B| = {y!r}")


def _closed(fid, y):
    if fid == "exp_neg":
        s = sinc(0.5 * y)
        return -sinc(y), 0.5 * s * s
    if fid == "psi":
        return None, (1.0 - tanc(0.5 * y)) / (y * y)
    if fid == "phi1":
        _pole_check_sinc(y, fid)
        return None, (1.0 - 1.0 / sinc(y)) / (y * y)
    if fid == "upsilon":
        _pole_check_sinc(y, fid)
        return (1.0 - 1.0 / sinc(y)) / (y * y), None
    if fid == "varphi1":
        s = sinc(0.5 * y)
        return 0.5 * s * s, (1.0 - sinc(y)) / (y * y)
    if fid == "phi2":
        s = sinc(0.5 * y)
        if abs(s) <= POLE_TOL:
            raise FilterPole(f"phi2: sinc(h|B|/2) vanishes at h|B| = {y!r}")
        return None, (1.0 - 1.0 / (s * s)) / (y * y)
    if fid == "sinch":
        return None, (1.0 - sinc(y)) / (y * y)
    if fid == "inv_varphi1":
        half = 0.5 * y
        if abs(math.sin(half)) <= POLE_TOL:
            raise SingularMatrix(f"varphi1 is singular at h|B| = {y!r}")
        return -0.5, (1.0 - half / math.tan(half)) / (y * y)
    raise KeyError(fid)


_F0 = {fid: (0.0 if fid == "upsilon" else 1.0) for fid in FILTERS}
_ODD_ONLY = {"upsilon"}
_EVEN_ONLY = {"psi", "phi1", "phi2", "sinch"}


def scaled_coeffs(fid, y):
    """Return ``(f(0), a1(y), a2(y))`` for filter ``fid``."""
    if abs(y) < COEFF_SWITCH:
        p1, p2 = _fallback_polys(fid)
        a1 = 0.0 if fid in _EVEN_ONLY else _poly_y2(p1, y)
        a2 = 0.0 if fid in _ODD_ONLY else _poly_y2(p2, y)
        return _F0[fid], a1, a2
    a1, a2 = _closed(fid, y)
    return _F0[fid], (a1 or 0.0), (a2 or 0.0)


def rodriguez_coeffs(fid, s, b):
    """Coefficients of ``f(s * hat(B))`` with respect to ``hat(B)``, ``|B| = b``."""
    f0, a1, a2 = scaled_coeffs(fid, s * b)
    return RodriguezCoeffs(f0, s * a1, s * s * a2)


def _apply(fid, s, B, v):
    b = norm(B)
    if b == 0.0:
        raise ZeroField(f"{fid}: magnetic field vanishes")
    return rodriguez_coeffs(fid, s, b).apply(B, np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# public filter actions


def apply_exp_neg(h, B, v):
    """Rotation ``exp(-h hat(B)) v``."""
    return _apply("exp_neg", h, B, v)


def apply_psi(h, B, v):
    """``Psi(h hat(B)) v`` with ``Psi(z) = tanh(z/2) / (z/2)``."""
    return _apply("psi", h, B, v)


def apply_phi1(h, B, v):
    """``Phi1(h hat(B)) v`` with ``Phi1(z) = z / sinh(z)``."""
    return _apply("phi1", h, B, v)


def apply_upsilon(h, B, v):
    """``Upsilon(h hat(B)) v`` with ``Upsilon(z) = (Phi1(z) - 1) / z``."""
    return _apply("upsilon", h, B, v)


def apply_varphi1(sign, h, B, v):
    """``varphi1(-sign * h hat(B)) v`` with ``varphi1(z) = (exp(z) - 1) / z``."""
    return _apply("varphi1", -sign * h, B, v)


def apply_inv_varphi1(sign, h, B, v):
    """Inverse action of :func:`apply_varphi1` with the same arguments."""
    return _apply("inv_varphi1", -sign * h, B, v)


def apply_phi2(h, B, v):
    """``Phi2(h hat(B)) v`` with ``Phi2(z) = 1 / sinch(z/2)**2``."""
    return _apply("phi2", h, B, v)


def apply_sinch(h, B, v):
    return _apply("sinch", h, B, v)


def series_oracle(fid, h, B, v, terms=40):
    """Truncated Taylor sum ``sum_{n<terms} c_n (h hat(B))**n v``.

    Brute-force reference for the closed forms above; it only converges for
    ``h|B|`` inside the radius of convergence of ``fid``.
    """
    c = taylor_coefficients(fid, terms)
    w = np.asarray(v, dtype=float)
    acc = float(c[0]) * w
    for n in range(1, terms):
        w = h * cross(B, w)
        if c[n]:
            acc = acc + float(c[n]) * w
    return acc
