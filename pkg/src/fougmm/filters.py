"""Vanishing-moment filters and the quadratic-variation moment matrix.

A filter of order ``l`` is a coefficient vector ``a`` with
``sum_q a_q q^r = 0`` for ``r < l`` and a non-zero ``l``-th moment.  Squaring a
filtered stationary series gives a moment whose expectation is a fixed linear
combination ``sum_k b_k rho(alpha k)`` of autocovariances; stacking the ``b``
vectors of several filters gives the matrix ``B``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, RankDeficient

__all__ = [
    "FilterKind",
    "Filter",
    "FilterBank",
    "finite_difference_filter",
    "daubechies_filter",
    "b_coeffs",
    "coefficient_correlation",
    "cross_covariance_coeffs",
    "build_bank",
    "order_condition_violations",
    "MOMENT_TOL",
    "MAX_DAUBECHIES",
]

MOMENT_TOL = 1e-10
MAX_DAUBECHIES = 10


class FilterKind(str, enum.Enum):
    FINITE_DIFFERENCE = "finite-difference"
    DAUBECHIES = "daubechies"


def _moment_errors(coeffs: np.ndarray, order: int) -> tuple[np.ndarray, float]:
    """Relative moments sum_q a_q q^r / sum_q |a_q| q^r for r = 0..order."""
    q = np.arange(len(coeffs), dtype=float)
    rel = np.empty(order + 1)
    for r in range(order + 1):
        w = q ** r
        scale = np.sum(np.abs(coeffs) * w)
        rel[r] = np.sum(coeffs * w) / scale if scale > 0 else 0.0
    return rel[:order], float(rel[order])


@dataclass(frozen=True)
class Filter:
    """Filter coefficients ``a_0..a_L`` with ``order`` vanishing moments.

    The moment conditions are checked at construction to ``MOMENT_TOL``
    relative to the coefficient scale.
    """

    coeffs: np.ndarray
    order: int
    kind: FilterKind = FilterKind.FINITE_DIFFERENCE

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float).ravel()
        if a.size == 0 or not np.all(np.isfinite(a)):
            raise DomainError("filter coefficients must be a finite, non-empty vector")
        if self.order < 0:
            raise DomainError("filter order must be non-negative")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "kind", FilterKind(self.kind))
        low, top = _moment_errors(a, self.order)
        if np.any(np.abs(low) > MOMENT_TOL):
            raise DomainError(f"coefficients do not have {self.order} vanishing moments")
        if abs(top) <= MOMENT_TOL:
            raise DomainError(f"moment of degree {self.order} vanishes; order is higher than stated")

    def __len__(self):
        return self.coeffs.size

    @property
    def span(self) -> int:
        """Largest lag used, i.e. padded length minus one."""
        return self.coeffs.size - 1

    def padded(self, length: int) -> "Filter":
        if length < self.coeffs.size:
            # trailing zeros may be dropped, real coefficients may not
            if np.any(self.coeffs[length:] != 0.0):
                raise DomainError("cannot shorten a filter below its support")
            return Filter(self.coeffs[:length], self.order, self.kind)
        a = np.zeros(length)
        a[: self.coeffs.size] = self.coeffs
        return Filter(a, self.order, self.kind)

    def moment_residuals(self) -> np.ndarray:
        """Relative moments of degree 0..order-1 (all ~0 for a valid filter)."""
        return _moment_errors(self.coeffs, self.order)[0]

    def __eq__(self, other):
        if not isinstance(other, Filter):
            return NotImplemented
        return (self.order == other.order and self.kind == other.kind
                and np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.order, self.kind, self.coeffs.tobytes()))


def finite_difference_filter(order: int, padded_len: int | None = None) -> Filter:
    """Iterated difference ``a_q = (-1)^q C(order, q)``, zero-padded to ``padded_len``.

    Examples
    --------
    >>> finite_difference_filter(2).coeffs
    array([ 1., -2.,  1.])
    """
    order = int(order)
    if order < 0:
        raise DomainError("order must be non-negative")
    if padded_len is None:
        padded_len = order + 1
    if padded_len < order + 1:
        raise DomainError(f"padded_len={padded_len} is shorter than order + 1 = {order + 1}")
    a = np.zeros(padded_len)
    for q in range(order + 1):
        a[q] = (-1) ** q * comb(order, q)
    return Filter(a, order, FilterKind.FINITE_DIFFERENCE)


def _daubechies_lowpass(p: int) -> np.ndarray:
    # Spectral factorization: |m0|^2 = cos^{2p}(w/2) P(sin^2(w/2)) with
    # P(y) = sum_k C(p-1+k, k) y^k.  Each root y of P maps to a pair z, 1/z of
    # z^2 - (2 - 4y) z + 1; keeping |z| < 1 gives the minimum-phase filter.
    poly = [comb(p - 1 + k, k) for k in range(p)]
    zeros = [-1.0] * p
    if p > 1:
        for y in np.roots(poly[::-1]):
            pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            zeros.append(pair[np.argmin(np.abs(pair))])
    h = np.real(np.poly(zeros))
    h = h * (np.sqrt(2.0) / h.sum())
    # numpy.poly orders by descending power; flip so the big taps come first,
    # matching the usual tabulation (0.4830, 0.8365, 0.2241, -0.1294 for p=2)
    return h[::-1].copy() if abs(h[0]) < abs(h[-1]) else h


def daubechies_filter(vanishing_moments: int) -> Filter:
    """Daubechies wavelet (high-pass) filter with ``p`` vanishing moments, length 2p.

    Coefficients come from the minimum-phase spectral factorization and are
    orthonormal (``sum a_q^2 = 1``).  The high-pass filter is the quadrature
    mirror ``g_k = (-1)^k h_{2p-1-k}`` of the scaling filter ``h``.
    """
    p = int(vanishing_moments)
    if not 1 <= p <= MAX_DAUBECHIES:
        raise DomainError(f"Daubechies order must lie in 1..{MAX_DAUBECHIES}, got {vanishing_moments}")
    h = _daubechies_lowpass(p)
    k = np.arange(2 * p)
    g = (-1.0) ** k * h[::-1]
    return Filter(g, p, FilterKind.DAUBECHIES)


def b_coeffs(f: Filter) -> np.ndarray:
    """Weights ``b`` with ``E[phi^2] = sum_k b_k rho(alpha k)``.

    ``b_0 = sum a_q^2`` and ``b_k = 2 sum_j a_{k+j} a_j`` for ``k >= 1``.
    """
    a = f.coeffs
    full = np.correlate(a, a, mode="full")[a.size - 1:]
    full[1:] *= 2.0
    return full


def coefficient_correlation(fi: Filter, fj: Filter) -> np.ndarray:
    """``c(d) = sum_q a^i_q a^j_{q-d}`` for ``d = -S..S`` (index ``d + S``)."""
    if len(fi) != len(fj):
        raise DomainError("filters must share the padded length")
    return np.convolve(fi.coeffs, fj.coeffs[::-1])


def cross_covariance_coeffs(fi: Filter, fj: Filter) -> Callable[[int, Callable], float]:
    """Return ``gamma(k, rho_lag)`` computing ``E[phi_i(t_{n+k}) phi_j(t_n)]``.

    ``rho_lag(m)`` must return the autocovariance at integer lag ``|m|`` (in
    units of the sampling step).  The double sum over coefficients is reduced
    to a single sum over coefficient offsets.
    """
    c = coefficient_correlation(fi, fj)
    span = len(fi) - 1
    d = np.arange(-span, span + 1)

    def gamma(k: int, rho_lag: Callable[[int], float]) -> float:
        lags = np.abs(int(k) - d)
        return float(sum(cd * rho_lag(int(m)) for cd, m in zip(c, lags) if cd != 0.0))

    return gamma


@dataclass(frozen=True)
class FilterBank:
    """Filters padded to a common length with their ``b`` vectors and ``B``."""

    filters: tuple[Filter, ...]
    b_vectors: np.ndarray = field(init=False, repr=False)
    B_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        filters = tuple(self.filters)
        if not filters:
            raise DomainError("a filter bank needs at least one filter")
        length = max(len(f) for f in filters)
        filters = tuple(f.padded(length) for f in filters)
        object.__setattr__(self, "filters", filters)
        B = np.vstack([b_coeffs(f) for f in filters])
        B.setflags(write=False)
        object.__setattr__(self, "b_vectors", B)
        object.__setattr__(self, "B_matrix", B)

    @property
    def n_filters(self) -> int:
        return len(self.filters)

    @property
    def span(self) -> int:
        """Common largest lag ``L`` (padded length minus one)."""
        return len(self.filters[0]) - 1

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(f.order for f in self.filters)

    @property
    def coeff_matrix(self) -> np.ndarray:
        return np.vstack([f.coeffs for f in self.filters])

    def rank(self) -> int:
        """Numerical rank of ``B`` from its singular values (tolerance 1e-10 ||B||)."""
        s = np.linalg.svd(self.B_matrix, compute_uv=False)
        return int(np.sum(s > 1e-10 * s[0])) if s[0] > 0 else 0

    def require_rank(self, p: int) -> int:
        r = self.rank()
        if r < p:
            raise RankDeficient(r, p)
        return r


def build_bank(orders: Sequence[int], kind: FilterKind | str = FilterKind.FINITE_DIFFERENCE,
               p: int = 1) -> FilterBank:
    """Build a bank from filter orders and check ``rank(B) >= p``.

    Raises
    ------
    RankDeficient
        If the stacked ``b`` vectors have rank below ``p``.
    """
    kind = FilterKind(kind)
    orders = [int(o) for o in orders]
    if not orders:
        raise DomainError("at least one filter order is required")
    if kind is FilterKind.FINITE_DIFFERENCE:
        filters = [finite_difference_filter(o) for o in orders]
    else:
        filters = [daubechies_filter(o) for o in orders]
    bank = FilterBank(tuple(filters))
    bank.require_rank(p)
    return bank


def order_condition_violations(orders: Sequence[int], H_max: float) -> list[tuple[int, int]]:
    """Pairs of orders ``(l, l')`` with ``2 (l + l') <= 4 H_max - 3``.

    The squared filtered series obeys a central limit theorem only when every
    pair satisfies the strict inequality; with all orders >= 1 that holds for
    any H < 1, and an order-0 filter restricts H to below 3/4.
    """
    out = []
    orders = list(orders)
    for i, li in enumerate(orders):
        for lj in orders[i:]:
            if not 2 * (li + lj) > 4.0 * H_max - 3.0:
                out.append((li, lj))
    return out
