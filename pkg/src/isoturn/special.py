"""Lower incomplete Beta function, evaluated in log space.

The continued fraction is the classical one for ``I_z(a, b)`` (modified Lentz
iteration), applied directly when ``z < (a + 1) / (a + b + 2)`` and through the
reflection ``B(z; a, b) = B(a, b) - B(1 - z; b, a)`` otherwise.  Both a scalar
routine and a numpy-vectorised one are provided; the latter backs the
pure-Python p-value kernel.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "IncompleteBetaError",
    "log_beta",
    "log_incomplete_beta",
    "incomplete_beta",
    "log_incomplete_beta_array",
]

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 200_000


class IncompleteBetaError(ArithmeticError):
    """Continued fraction failed to converge."""


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _check_args(z, a, b):
    if not (a > 0 and b > 0):
        raise ValueError(f"a and b must be positive, got a={a}, b={b}")
    if not (0.0 <= z <= 1.0):
        raise ValueError(f"z must lie in [0, 1], got {z}")


def _continued_fraction(z: float, a: float, b: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * z / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            return h
    raise IncompleteBetaError(f"continued fraction did not converge for z={z}, a={a}, b={b}")


def _log_lower_direct(z: float, a: float, b: float) -> float:
    # valid when z < (a + 1) / (a + b + 2)
    cf = _continued_fraction(z, a, b)
    return a * math.log(z) + b * math.log1p(-z) - math.log(a) + math.log(cf)


def log_incomplete_beta(z: float, a: float, b: float) -> float:
    """Natural log of ``B(z; a, b) = int_0^z t^(a-1) (1-t)^(b-1) dt``."""
    _check_args(z, a, b)
    if z == 0.0:
        return -math.inf
    if z == 1.0:
        return log_beta(a, b)
    if z < (a + 1.0) / (a + b + 2.0):
        return _log_lower_direct(z, a, b)
    lb = log_beta(a, b)
    upper = _log_lower_direct(1.0 - z, b, a)
    return lb + math.log1p(-math.exp(upper - lb))


def incomplete_beta(z: float, a: float, b: float) -> float:
    """Non-regularized lower incomplete Beta function ``B(z; a, b)``.

    >>> round(incomplete_beta(0.828, 1, 2), 6)
    0.485208
    """
    return math.exp(log_incomplete_beta(z, a, b))


def log_incomplete_beta_array(z, a, b) -> np.ndarray:
    """Vectorised :func:`log_incomplete_beta` over broadcast arrays.

    Elements are iterated jointly; the loop stops once every element's
    continued fraction has converged.
    """
    z, a, b = np.broadcast_arrays(
        np.asarray(z, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("a and b must be positive")
    if np.any((z < 0) | (z > 1)):
        raise ValueError("z must lie in [0, 1]")
    out = np.empty(z.shape, dtype=float)
    lb = _log_beta_array(a, b)

    at_zero = z == 0.0
    at_one = z == 1.0
    out[at_zero] = -np.inf
    out[at_one] = lb[at_one]
    inner = ~(at_zero | at_one)
    direct = inner & (z < (a + 1.0) / (a + b + 2.0))
    reflect = inner & ~direct

    if direct.any():
        out[direct] = _log_lower_direct_array(z[direct], a[direct], b[direct])
    if reflect.any():
        upper = _log_lower_direct_array(1.0 - z[reflect], b[reflect], a[reflect])
        lbr = lb[reflect]
        out[reflect] = lbr + np.log1p(-np.exp(upper - lbr))
    return out


def _log_beta_array(a, b):
    from scipy.special import gammaln

    return gammaln(a) + gammaln(b) - gammaln(a + b)


def _log_lower_direct_array(z, a, b):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(z)
    d = 1.0 - qab * z / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    live = np.ones(z.shape, dtype=bool)
    for m in range(1, _MAX_ITER + 1):
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        zz, aa_, bb, cc, dd = z[idx], a[idx], b[idx], c[idx], d[idx]
        m2 = 2 * m
        num = m * (bb - m) * zz / ((qam[idx] + m2) * (aa_ + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        hh = h[idx] * dd * cc
        num = -(aa_ + m) * (qab[idx] + m) * zz / ((aa_ + m2) * (qap[idx] + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        step = dd * cc
        hh *= step
        h[idx] = hh
        c[idx] = cc
        d[idx] = dd
        live[idx] = np.abs(step - 1.0) >= _EPS
    else:
        raise IncompleteBetaError("continued fraction did not converge")
    return a * np.log(z) + b * np.log1p(-z) - np.log(a) + np.log(h)
