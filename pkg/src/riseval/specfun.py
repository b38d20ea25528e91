"""Special functions needed by the closed-form coverage expressions.

Real arguments only.  Every function accepts scalars or numpy arrays and
returns the same shape (0-d input gives a Python float).

- ``bessel_k0`` / ``bessel_k1``: ascending series for x <= 2, Steed's
  continued fraction above.
- ``exp_integral_e1``: power series for z <= 1, Lentz continued fraction
  above.
- ``whittaker_w_mhalf_zero``: through ``W_{-1/2,0}(z) = e^{z/2} sqrt(z) E1(z)``.
- ``gauss_2f1_negz``: hypergeometric 2F1 on the non-positive real axis,
  mapped to a series argument in [0, 1/2].
- ``log_gamma``: thin wrapper over :func:`math.lgamma`.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_EPS = np.finfo(float).eps
_TINY = 1e-300
_K_UNDERFLOW = 1e-300


class SpecFunResult(NamedTuple):
    value: float | np.ndarray
    est_abs_error: float | np.ndarray


def _out(x_in, arr):
    return float(arr.reshape(())) if np.ndim(x_in) == 0 else arr


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"{name}: argument must be > 0")
    return arr


# ---------------------------------------------------------------- Bessel K


def _k01_small(x):
    t = 0.25 * x * x
    log_half = np.log(0.5 * x)
    term0 = np.ones_like(x)  # t^k / (k!)^2
    term1 = np.ones_like(x)  # t^k / (k! (k+1)!)
    i0 = np.zeros_like(x)
    i1s = np.zeros_like(x)
    s0 = np.zeros_like(x)
    s1 = np.zeros_like(x)
    harm = 0.0
    for k in range(40):
        harm_next = harm + 1.0 / (k + 1)
        i0 += term0
        i1s += term1
        s0 += harm * term0
        s1 += (harm + harm_next - 2.0 * EULER_GAMMA) * term1
        term0 = term0 * t / ((k + 1) * (k + 1))
        term1 = term1 * t / ((k + 1) * (k + 2))
        harm = harm_next
    k0 = -(log_half + EULER_GAMMA) * i0 + s0
    i1 = 0.5 * x * i1s
    k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1
    return k0, k1


def _k01_scaled_large(x):
    """``e^x K0(x)`` and ``e^x K1(x)`` by Steed's method (x >= 2)."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    active = np.ones(x.shape, dtype=bool)
    for i in range(2, 400):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = np.where(active, s + dels, s)
        active &= np.abs(dels / s) >= _EPS
        if not active.any():
            break
    # the recurrences keep running on converged lanes, so h is taken from
    # the final pass; it converges at least as fast as s
    h = a1 * h
    k0e = np.sqrt(np.pi / (2.0 * x)) / s
    k1e = k0e * (x + 0.5 - h) / x
    return k0e, k1e


def _k01(x):
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= 2.0
    if small.any():
        k0[small], k1[small] = _k01_small(x[small])
    big = ~small
    if big.any():
        xb = x[big]
        k0e, k1e = _k01_scaled_large(xb)
        scale = np.exp(-xb)
        k0[big] = k0e * scale
        k1[big] = k1e * scale
    k0[k0 < _K_UNDERFLOW] = 0.0
    k1[k1 < _K_UNDERFLOW] = 0.0
    return k0, k1


def bessel_k0(x):
    """Modified Bessel function of the second kind, order zero."""
    arr = np.atleast_1d(_positive(x, "bessel_k0")).astype(float)
    return _out(x, _k01(arr.ravel())[0].reshape(arr.shape))


def bessel_k1(x):
    """Modified Bessel function of the second kind, order one."""
    arr = np.atleast_1d(_positive(x, "bessel_k1")).astype(float)
    return _out(x, _k01(arr.ravel())[1].reshape(arr.shape))


# ------------------------------------------------------ exponential integral


def _e1_series(z):
    term = np.ones_like(z)
    acc = np.zeros_like(z)
    for k in range(1, 60):
        term = -term * z / k
        acc -= term / k
    return -EULER_GAMMA - np.log(z) + acc


def _e1_scaled_cf(z):
    """``e^z E1(z)`` by the modified Lentz algorithm (z > 1)."""
    b = z + 1.0
    c = np.full_like(z, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(z.shape, dtype=bool)
    for i in range(1, 500):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            break
    return h


def _e1_parts(z):
    """Return (E1(z), e^z E1(z)) without overflow in either."""
    val = np.empty_like(z)
    scaled = np.empty_like(z)
    small = z <= 1.0
    if small.any():
        zs = z[small]
        v = _e1_series(zs)
        val[small] = v
        scaled[small] = v * np.exp(zs)
    big = ~small
    if big.any():
        zb = z[big]
        s = _e1_scaled_cf(zb)
        scaled[big] = s
        val[big] = s * np.exp(-zb)
    return val, scaled


def exp_integral_e1(z):
    """Exponential integral ``E1(z) = int_1^inf e^{-zt}/t dt`` for z > 0."""
    arr = np.atleast_1d(_positive(z, "exp_integral_e1")).astype(float)
    return _out(z, _e1_parts(arr.ravel())[0].reshape(arr.shape))


def whittaker_w_mhalf_zero(z):
    """Whittaker function ``W_{-1/2,0}(z)`` for z > 0."""
    arr = np.atleast_1d(_positive(z, "whittaker_w_mhalf_zero")).astype(float).ravel()
    _, scaled = _e1_parts(arr)
    val = np.sqrt(arr) * np.exp(-0.5 * arr) * scaled
    return _out(z, val.reshape(np.shape(np.atleast_1d(z))))


# ------------------------------------------------------------------- gamma


def log_gamma(x):
    """Natural log of the gamma function for x > 0."""
    arr = _positive(x, "log_gamma")
    if arr.ndim == 0:
        return math.lgamma(float(arr))
    return np.vectorize(math.lgamma, otypes=[float])(arr)


def _rgamma(x: float) -> float:
    """``1/Gamma(x)``, zero at the poles."""
    if x <= 0 and float(x).is_integer():
        return 0.0
    return 1.0 / math.gamma(x)


# -------------------------------------------------------------- Gauss 2F1


def gauss_2f1_series(a, b, c, z, max_terms=100000, return_error=False):
    """Direct power series of 2F1 for |z| < 1."""
    zz = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if np.any(np.abs(zz) >= 1):
        raise ValueError("gauss_2f1_series: |z| < 1 required")
    val, err = _series(a, b, c, zz, max_terms)
    shape = np.shape(np.atleast_1d(z))
    val, err = _out(z, val.reshape(shape)), _out(z, err.reshape(shape))
    return SpecFunResult(val, err) if return_error else val


def _series(a, b, c, w, max_terms):
    term = np.ones_like(w)
    total = np.ones_like(w)
    absum = np.ones_like(w)
    for n in range(max_terms):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * w
        total = total + term
        absum = absum + np.abs(term)
        if np.all(np.abs(term) <= _EPS * np.abs(total)) and n > 2:
            break
    else:
        raise ArithmeticError("2F1 series did not converge")
    err = 4.0 * _EPS * absum + np.abs(term)
    return total, err


def gauss_2f1_negz(a, b, c, z, return_error=False):
    """Gauss hypergeometric function ``2F1(a, b; c; z)`` for real z <= 0.

    For -1 <= z <= 0 the Pfaff transformation maps the argument to
    ``z/(z-1)`` in [0, 1/2].  For z < -1 the connection formula in
    ``1/(1-z)`` (again in (0, 1/2)) is used, which needs ``a - b`` to be
    non-integral; otherwise the Pfaff series is summed directly.
    """
    a, b, c = float(a), float(b), float(c)
    if c <= 0 and abs(c - round(c)) <= 1e-9:
        raise ValueError("gauss_2f1_negz: c must not be a non-positive integer")
    zz = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if np.any(zz > 0) or np.any(~np.isfinite(zz)):
        raise ValueError("gauss_2f1_negz: z must be finite and <= 0")
    val = np.empty_like(zz)
    err = np.empty_like(zz)
    integral_ab = abs((a - b) - round(a - b)) <= 1e-9
    near = (zz >= -1.0) | integral_ab
    if near.any():
        zn = zz[near]
        pref = (1.0 - zn) ** (-a)
        s, e = _series(a, c - b, c, zn / (zn - 1.0), 2_000_000)
        val[near] = pref * s
        err[near] = pref * e
    far = ~near
    if far.any():
        zf = zz[far]
        x = 1.0 / (1.0 - zf)
        g_c = math.gamma(c)
        coef1 = g_c * math.gamma(b - a) * _rgamma(b) * _rgamma(c - a)
        coef2 = g_c * math.gamma(a - b) * _rgamma(a) * _rgamma(c - b)
        s1, e1 = _series(a, c - b, a - b + 1.0, x, 10000)
        s2, e2 = _series(b, c - a, b - a + 1.0, x, 10000)
        t1 = coef1 * x**a
        t2 = coef2 * x**b
        val[far] = t1 * s1 + t2 * s2
        err[far] = np.abs(t1) * e1 + np.abs(t2) * e2 + 8 * _EPS * (np.abs(t1 * s1) + np.abs(t2 * s2))
    shape = np.shape(np.atleast_1d(z))
    val, err = _out(z, val.reshape(shape)), _out(z, err.reshape(shape))
    return SpecFunResult(val, err) if return_error else val
