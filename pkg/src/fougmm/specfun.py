"""Gamma, digamma and regularized incomplete gamma functions.

All functions accept scalars or numpy arrays (broadcast elementwise) and
return a float for scalar input.  They are written against numpy only so the
covariance code has no hidden dependency on a particular special-function
library; scipy/mpmath are used in the tests as independent references.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = [
    "gamma_fn",
    "log_gamma",
    "digamma",
    "reg_lower_incomplete_gamma",
    "reg_upper_incomplete_gamma",
    "upper_gamma_scaled",
]

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_SQRT_2PI = np.sqrt(2.0 * np.pi)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

_EPS = np.finfo(float).eps
_TINY = 1e-300
_MAX_ITER = 1000


def _as_float_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _unwrap(out, scalar):
    return float(out) if scalar else out


def _lanczos_sum(z):
    # z = x - 1 for x >= 0.5
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[i] / (z + i)
    return acc


def _log_gamma_scalar(x: float) -> float:
    if x < 0.5:
        return math.log(math.pi / math.sin(math.pi * x)) - _log_gamma_scalar(1.0 - x)
    z = x - 1.0
    acc = _LANCZOS_COEF_LIST[0]
    for i in range(1, len(_LANCZOS_COEF_LIST)):
        acc += _LANCZOS_COEF_LIST[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _LOG_SQRT_2PI + (z + 0.5) * math.log(t) - t + math.log(acc)


_LANCZOS_COEF_LIST = [float(c) for c in _LANCZOS_COEF]


def gamma_fn(x):
    """Gamma function for positive real arguments.

    Uses the Lanczos approximation for x >= 1/2 and the reflection formula
    below that.  The power t**(x - 1/2) is split in two halves so the result
    does not overflow before the true value does.
    """
    x, scalar = _as_float_array(x)
    if np.any(~(x > 0)):
        raise DomainError("gamma_fn requires x > 0")
    out = np.empty_like(x)
    small = x < 0.5
    big = ~small
    if np.any(big):
        z = x[big] - 1.0
        t = z + _LANCZOS_G + 0.5
        half = t ** ((z + 0.5) / 2.0)
        out[big] = _SQRT_2PI * half * (half * np.exp(-t)) * _lanczos_sum(z)
    if np.any(small):
        xs = x[small]
        out[small] = np.pi / (np.sin(np.pi * xs) * gamma_fn(1.0 - xs))
    return _unwrap(out, scalar)


def log_gamma(x):
    """Natural log of the gamma function for x > 0."""
    if isinstance(x, (float, int)) and not isinstance(x, bool):
        if not x > 0:
            raise DomainError("log_gamma requires x > 0")
        return _log_gamma_scalar(float(x))
    x, scalar = _as_float_array(x)
    if np.any(~(x > 0)):
        raise DomainError("log_gamma requires x > 0")
    out = np.empty_like(x)
    small = x < 0.5
    big = ~small
    if np.any(big):
        z = x[big] - 1.0
        t = z + _LANCZOS_G + 0.5
        out[big] = _LOG_SQRT_2PI + (z + 0.5) * np.log(t) - t + np.log(_lanczos_sum(z))
    if np.any(small):
        xs = x[small]
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - log_gamma(1.0 - xs)
    return _unwrap(out, scalar)


# Bernoulli-number coefficients B_2k / (2k) for the asymptotic digamma series.
_DIGAMMA_ASYMP = np.array([
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
])


def digamma(x):
    """Digamma function psi(x) = d/dx log Gamma(x) for x > 0.

    Shifts the argument above 10 with psi(x) = psi(x + 1) - 1/x, then applies
    the asymptotic expansion.
    """
    x, scalar = _as_float_array(x)
    if np.any(~(x > 0)):
        raise DomainError("digamma requires x > 0")
    shift = np.zeros_like(x)
    z = x.copy()
    while True:
        low = z < 10.0
        if not np.any(low):
            break
        shift[low] -= 1.0 / z[low]
        z[low] += 1.0
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in _DIGAMMA_ASYMP[::-1]:
        series = (series + coef) * inv2
    out = np.log(z) - 0.5 / z - series + shift
    return _unwrap(out, scalar)


def _check_incgamma_args(a, x):
    a, sa = _as_float_array(a)
    x, sx = _as_float_array(x)
    if np.any(~(a > 0)):
        raise DomainError("incomplete gamma requires a > 0")
    if np.any(~(x >= 0)):
        raise DomainError("incomplete gamma requires x >= 0")
    a, x = np.broadcast_arrays(a, x)
    return a.astype(float), x.astype(float), sa and sx


def _lower_series(a, x):
    """Sum x^n / ((a+1)...(a+n)); P(a,x) = this * x^a e^-x / Gamma(a+1)."""
    term = np.ones_like(x)
    total = np.ones_like(x)
    ap = a.copy()
    for i in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if i % 4 == 3 and np.all(np.abs(term) <= np.abs(total) * _EPS):
            break
    return total


def _upper_cf(a, x):
    """Modified Lentz evaluation of e^x x^-a Gamma(a, x); accurate for x >= a + 1.

    In that region every partial denominator is at least 2, so the usual
    tiny-value guards of Lentz's method are only needed on the first step.
    """
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = d * c
        h *= delta
        if i % 4 == 0 and np.all(np.abs(delta - 1.0) <= _EPS):
            break
    return h


def reg_lower_incomplete_gamma(a, x):
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).

    Series expansion for x < a + 1, continued fraction for the complement
    otherwise.
    """
    a, x, scalar = _check_incgamma_args(a, x)
    out = np.zeros_like(x)
    pos = x > 0
    ser = pos & (x < a + 1.0)
    cf = pos & ~ser
    if np.any(ser):
        aa, xx = a[ser], x[ser]
        pref = np.exp(aa * np.log(xx) - xx - log_gamma(aa + 1.0))
        out[ser] = pref * _lower_series(aa, xx)
    if np.any(cf):
        aa, xx = a[cf], x[cf]
        pref = np.exp(aa * np.log(xx) - xx - log_gamma(aa))
        out[cf] = 1.0 - pref * _upper_cf(aa, xx)
    return _unwrap(np.clip(out, 0.0, 1.0), scalar)


def reg_upper_incomplete_gamma(a, x):
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    a, x, scalar = _check_incgamma_args(a, x)
    out = np.ones_like(x)
    pos = x > 0
    ser = pos & (x < a + 1.0)
    cf = pos & ~ser
    if np.any(ser):
        aa, xx = a[ser], x[ser]
        pref = np.exp(aa * np.log(xx) - xx - log_gamma(aa + 1.0))
        out[ser] = 1.0 - pref * _lower_series(aa, xx)
    if np.any(cf):
        aa, xx = a[cf], x[cf]
        pref = np.exp(aa * np.log(xx) - xx - log_gamma(aa))
        out[cf] = pref * _upper_cf(aa, xx)
    return _unwrap(np.clip(out, 0.0, 1.0), scalar)


def upper_gamma_scaled(a, x):
    """e^x * Q(a, x) without overflow for large x (x > 0).

    ``a`` may be a scalar shared by every ``x``, which is the common case in
    the covariance code and avoids per-element log-gamma work.
    """
    if np.ndim(a) == 0:
        a = float(a)
        if not a > 0:
            raise DomainError("incomplete gamma requires a > 0")
        x, scalar = _as_float_array(x)
        if np.any(~(x > 0)):
            raise DomainError("upper_gamma_scaled requires x > 0")
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        ser = x < a + 1.0
        cf = ~ser
        if np.any(ser):
            xx = x[ser]
            pref = np.exp(a * np.log(xx) - xx - log_gamma(a + 1.0))
            out[ser] = np.exp(xx) * (1.0 - pref * _lower_series(np.full_like(xx, a), xx))
        if np.any(cf):
            xx = x[cf]
            out[cf] = np.exp(a * np.log(xx) - log_gamma(a)) * _upper_cf(a, xx)
        return float(out[0]) if scalar else out
    a, x, scalar = _check_incgamma_args(a, x)
    if np.any(~(x > 0)):
        raise DomainError("upper_gamma_scaled requires x > 0")
    out = np.empty_like(x)
    ser = x < a + 1.0
    cf = ~ser
    if np.any(ser):
        aa, xx = a[ser], x[ser]
        pref = np.exp(aa * np.log(xx) - xx - log_gamma(aa + 1.0))
        out[ser] = np.exp(xx) * (1.0 - pref * _lower_series(aa, xx))
    if np.any(cf):
        aa, xx = a[cf], x[cf]
        out[cf] = np.exp(aa * np.log(xx) - log_gamma(aa)) * _upper_cf(aa, xx)
    return _unwrap(out, scalar)
