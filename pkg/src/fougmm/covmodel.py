"""Autocovariance of the stationary fractional Ornstein-Uhlenbeck process.

Three evaluators are provided:

* ``fou_rho_closed``  -- incomplete-gamma closed form, valid for H >= 1/2;
* ``fou_rho_spectral`` -- direct quadrature of the spectral (cosine) integral,
  valid for every H in (0, 1);
* ``fou_rho_tail``    -- large-lag power-law expansion.

``rho`` dispatches between them.  ``FouModel`` wraps the dispatcher behind the
generic :class:`CovarianceModel` interface consumed by the GMM and sampler
code, which never assume a particular process.
"""
from __future__ import annotations

import functools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from . import specfun
from .errors import DomainError, IntegrationError

__all__ = [
    "FouParams",
    "ParamTriple",
    "EstimationBox",
    "CovarianceModel",
    "FouModel",
    "fou_var0",
    "fou_spectral_density",
    "fou_rho_closed",
    "fou_rho_spectral",
    "fou_rho_tail",
    "tail_coefficient",
    "rho",
    "check_identifiability",
    "check_tail_switch",
    "fit_tail_coefficient",
    "LAMBDA_IDENTIFIABILITY_BOUND",
    "TAIL_SWITCH",
    "EVALUATORS",
]

PARAM_NAMES = ("H", "lambda", "sigma")

#: lambda must stay below exp(digamma(3)) for the local injectivity argument.
LAMBDA_IDENTIFIABILITY_BOUND = float(np.exp(specfun.digamma(3.0)))

#: lambda * t above which the asymptotic tail replaces the exact evaluators.
TAIL_SWITCH = 30.0

#: terms of the asymptotic series used by the dispatcher past the switch.
TAIL_TERMS = 8

#: evaluator choices of :class:`FouModel`.
EVALUATORS = ("auto", "closed", "spectral")


@dataclass(frozen=True)
class FouParams:
    """Parameter triple (H, lambda, sigma) of a stationary fOU process."""

    H: float
    lam: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.H < 1.0:
            raise DomainError(f"H must lie in (0, 1), got {self.H}")
        if not self.lam > 0.0:
            raise DomainError(f"lambda must be positive, got {self.lam}")
        if not self.sigma > 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.H, self.lam, self.sigma])

    @classmethod
    def from_array(cls, v) -> "FouParams":
        H, lam, sigma = (float(x) for x in v)
        return cls(H, lam, sigma)

    def replace(self, **kw) -> "FouParams":
        d = {"H": self.H, "lam": self.lam, "sigma": self.sigma}
        d.update(kw)
        return FouParams(**d)


class ParamTriple(NamedTuple):
    """Unvalidated (H, lambda, sigma) triple, used for box corners."""

    H: float
    lam: float
    sigma: float


@dataclass(frozen=True)
class EstimationBox:
    """Compact rectangle of admissible (H, lambda, sigma) values."""

    lo: ParamTriple
    hi: ParamTriple

    def __post_init__(self):
        lo, hi = ParamTriple(*self.lo), ParamTriple(*self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not all(a < b for a, b in zip(lo, hi)):
            raise DomainError(f"box bounds must satisfy lo < hi componentwise: {lo} vs {hi}")
        if not (0.0 < lo.H and hi.H < 1.0):
            raise DomainError("box must keep H inside (0, 1)")
        if not lo.lam > 0.0:
            raise DomainError("box must keep lambda > 0")

    @classmethod
    def from_bounds(cls, H=(0.5, 0.99), lam=(0.01, 2.5), sigma=(0.01, 10.0)) -> "EstimationBox":
        return cls(ParamTriple(H[0], lam[0], sigma[0]), ParamTriple(H[1], lam[1], sigma[1]))

    @classmethod
    def default(cls) -> "EstimationBox":
        return cls.from_bounds()

    def contains(self, p: FouParams, strict: bool = False) -> bool:
        v = (p.H, p.lam, p.sigma)
        if strict:
            return all(a < x < b for a, x, b in zip(self.lo, v, self.hi))
        return all(a <= x <= b for a, x, b in zip(self.lo, v, self.hi))

    def center(self) -> FouParams:
        return FouParams(*((a + b) / 2.0 for a, b in zip(self.lo, self.hi)))


# ---------------------------------------------------------------------------
# scalar model formulas
# ---------------------------------------------------------------------------

def fou_var0(params: FouParams) -> float:
    """Stationary variance sigma^2 lambda^(-2H) H Gamma(2H), via log-gamma."""
    H, lam, sig = params.H, params.lam, params.sigma
    return float(sig * sig * H * np.exp(specfun.log_gamma(2.0 * H) - 2.0 * H * np.log(lam)))


def _c_H(H: float) -> float:
    return float(specfun.gamma_fn(2.0 * H + 1.0) * np.sin(np.pi * H) / (2.0 * np.pi))


def fou_spectral_density(params: FouParams, x):
    """Continuous-time spectral density sigma^2 c_H |x|^(1-2H) / (x^2 + lambda^2)."""
    x = np.abs(np.asarray(x, dtype=float))
    H, lam, sig = params.H, params.lam, params.sigma
    return sig * sig * _c_H(H) * x ** (1.0 - 2.0 * H) / (x * x + lam * lam)


# below this s = lambda t the odd-part power series is used
_SMALL_S = 2.0
_SMALL_TERMS = 41


def _scaled_closed_small(a: float, s: np.ndarray) -> np.ndarray:
    # Using P(a,s) = s^a e^-s M(1, a+1, s) / Gamma(a+1) the closed form below
    # collapses to cosh(s) - s^a / Gamma(a+1) * sum_{n odd} s^n / (a+1)_n.
    # For s <= 2 at most a factor ~12 of relative accuracy is lost to cancellation.
    n = np.arange(1, _SMALL_TERMS + 1, dtype=float)
    log_poch = np.cumsum(np.log(a + n))[::2]
    odd = n[::2]
    terms = np.exp(np.outer(np.log(s), odd) - log_poch)
    pref = np.exp(a * np.log(s) - specfun.log_gamma(a + 1.0))
    return np.cosh(s) - pref * terms.sum(axis=1)


def _scaled_closed(a: float, s: np.ndarray) -> np.ndarray:
    """rho(t) / Var(X0) as a function of s = lambda t, shape a = 2H - 1 > 0.

    Integrating the incomplete-gamma term by parts gives

        K(s) = e^-s / 2 + e^s Q(a, s) / 2 + s^a / (2 Gamma(a+1)) * sum_k Pois(k; s) a / (k + a)

    Every piece is bounded (no e^{2 lambda t} growth), and all terms are
    non-negative, so the sum is free of cancellation.  Small ``s`` goes
    through an equivalent short power series, which is much cheaper.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    zero = s == 0.0
    out[zero] = 1.0
    small = ~zero & (s <= _SMALL_S)
    if np.any(small):
        out[small] = _scaled_closed_small(a, s[small])
    big = s > _SMALL_S
    if not np.any(big):
        return out
    sp = s[big]
    smax = float(sp.max())
    kmax = int(math.ceil(smax + 12.0 * math.sqrt(smax) + 40.0))
    k = np.arange(kmax + 1, dtype=float)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(k[1:]))))
    log_pmf = np.outer(np.log(sp), k) - sp[:, None] - log_fact[None, :]
    weights = a / (k + a)
    poisson_sum = np.exp(log_pmf) @ weights
    term3 = np.exp(a * np.log(sp) - specfun.log_gamma(a + 1.0)) * poisson_sum / 2.0
    term2 = specfun.upper_gamma_scaled(a, sp) / 2.0
    out[big] = np.exp(-sp) / 2.0 + term2 + term3
    return out


def _scaled_closed_quadrature(a: float, s: float) -> float:
    """Same quantity as ``_scaled_closed`` from e^-s + int_0^s e^(2u-s) Q(a,u) du."""
    if s == 0.0:
        return 1.0
    val, _ = integrate.quad(
        lambda u: np.exp(2.0 * u - s) * specfun.reg_upper_incomplete_gamma(a, u),
        0.0, s, epsabs=1e-13, epsrel=1e-12, limit=400,
    )
    return float(np.exp(-s) + val)


def fou_rho_closed(params: FouParams, t, method: str = "series"):
    """Autocovariance for H >= 1/2 from the incomplete-gamma representation.

    ``method="series"`` (default) uses the integrated-by-parts closed form;
    ``method="quadrature"`` integrates e^(2u-s) Q(2H-1, u) over [0, lambda t]
    with adaptive Gauss-Kronrod.  H = 1/2 is returned as the exact exponential
    covariance.
    """
    if params.H < 0.5:
        raise DomainError("closed form requires H >= 1/2; use fou_rho_spectral")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("lag t must be non-negative")
    var0 = fou_var0(params)
    s = params.lam * np.atleast_1d(t_arr)
    if params.H == 0.5:
        k = np.exp(-s)
    elif method == "series":
        k = _scaled_closed(2.0 * params.H - 1.0, s)
    elif method == "quadrature":
        a = 2.0 * params.H - 1.0
        k = np.array([_scaled_closed_quadrature(a, float(x)) for x in s])
    else:
        raise ValueError(f"unknown method {method!r}")
    out = var0 * k
    return float(out[0]) if t_arr.ndim == 0 else out.reshape(t_arr.shape)


def _spectral_single(params: FouParams, t: float, tol: float) -> float:
    H, lam = params.H, params.lam
    pref = 2.0 * params.sigma ** 2 * _c_H(H)
    opts = dict(epsabs=tol / (4.0 * pref), epsrel=1e-12, limit=400)
    if t == 0.0:
        # split at 1; on [1, inf) substitute x = 1/y to get a finite algebraic weight
        a, ea = integrate.quad(lambda x: 1.0 / (lam * lam + x * x), 0.0, 1.0,
                               weight="alg", wvar=(1.0 - 2.0 * H, 0.0), **opts)
        b, eb = integrate.quad(lambda y: 1.0 / (lam * lam * y * y + 1.0), 0.0, 1.0,
                               weight="alg", wvar=(2.0 * H - 1.0, 0.0), **opts)
    else:
        x0 = max(1.0, 1.0 / t)
        a, ea = integrate.quad(lambda x: np.cos(t * x) / (lam * lam + x * x), 0.0, x0,
                               weight="alg", wvar=(1.0 - 2.0 * H, 0.0), **opts)
        # Fourier-type integral over the oscillatory tail (cycle-wise with extrapolation)
        b, eb = integrate.quad(lambda x: x ** (1.0 - 2.0 * H) / (lam * lam + x * x), x0, np.inf,
                               weight="cos", wvar=t, epsabs=tol / (4.0 * pref), limlst=200)
    err = pref * (ea + eb)
    if not np.isfinite(err) or err > tol:
        raise IntegrationError(f"spectral integral at t={t} reached error {err:.2e} > tol {tol:.2e}")
    return float(pref * (a + b))


def fou_rho_spectral(params: FouParams, t, tol: float = 1e-10):
    """Autocovariance by quadrature of 2 sigma^2 c_H int_0^inf cos(tx) x^(1-2H) / (lambda^2 + x^2) dx.

    Valid for every H in (0, 1).  ``tol`` is an absolute tolerance on the
    returned covariance; :class:`IntegrationError` is raised when the
    quadrature error estimate exceeds it.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("lag t must be non-negative")
    flat = np.atleast_1d(t_arr).ravel()
    out = np.array([_spectral_single(params, float(x), tol) for x in flat])
    return float(out[0]) if t_arr.ndim == 0 else out.reshape(t_arr.shape)


def tail_coefficient(params: FouParams, convention: str = "exact") -> float:
    """Leading coefficient c of rho(t) ~ c t^(2H-2).

    ``"exact"`` is sigma^2 H (2H-1) / lambda^2, the value recovered from the
    spectral integral; ``"lambda1"`` is sigma^2 H (2H-1) / lambda, a competing
    normalization that only agrees at lambda = 1.
    """
    base = params.sigma ** 2 * params.H * (2.0 * params.H - 1.0)
    if convention == "exact":
        return base / params.lam ** 2
    if convention == "lambda1":
        return base / params.lam
    raise ValueError(f"unknown convention {convention!r}")


def fou_rho_tail(params: FouParams, t, terms: int = 1):
    """Large-lag asymptotic expansion of the autocovariance.

    With ``terms=1`` this is the leading power law c t^(2H-2) with
    c = sigma^2 H (2H-1) / lambda^2.  Higher ``terms`` add the next orders of

        (sigma^2 / 2) sum_n lambda^(-2n) prod_{k<2n} (2H - k) t^(2H - 2n),

    which is what the dispatcher uses past the switch point.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("tail expansion needs t > 0")
    H, lam = params.H, params.lam
    out = np.zeros_like(t_arr)
    coef = 1.0
    for n in range(1, terms + 1):
        coef *= (2.0 * H - (2 * n - 2)) * (2.0 * H - (2 * n - 1))
        out = out + 0.5 * params.sigma ** 2 * coef * lam ** (-2.0 * n) * t_arr ** (2.0 * H - 2.0 * n)
    return float(out) if t_arr.ndim == 0 else out


def rho(params: FouParams, t, switch: float = TAIL_SWITCH, spectral_rtol: float = 1e-11):
    """Autocovariance at lags ``t`` (scalar or array), routed to the right evaluator.

    ``spectral_rtol`` is the quadrature tolerance relative to Var(X0).

    * H = 1/2: exact exponential covariance;
    * H > 1/2, lambda t <= switch: closed form;
    * H < 1/2, lambda t <= switch: spectral quadrature;
    * lambda t > switch: asymptotic tail with ``TAIL_TERMS`` terms.
    """
    t_arr = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t_arr).ravel()
    if np.any(flat < 0):
        raise DomainError("lag t must be non-negative")
    if params.H == 0.5:
        out = fou_var0(params) * np.exp(-params.lam * flat)
    else:
        out = np.empty_like(flat)
        near = params.lam * flat <= switch
        if np.any(near):
            if params.H > 0.5:
                out[near] = fou_rho_closed(params, flat[near])
            else:
                out[near] = _spectral_cached(params, flat[near], spectral_rtol * fou_var0(params))
        if np.any(~near):
            out[~near] = fou_rho_tail(params, flat[~near], terms=TAIL_TERMS)
    return float(out[0]) if t_arr.ndim == 0 else out.reshape(t_arr.shape)


def _spectral_cached(params, t, tol):
    out = np.empty_like(t)
    for i, x in enumerate(t):
        out[i] = _spectral_memo(params, float(x), tol)
    return out


@functools.lru_cache(maxsize=65536)
def _spectral_memo(params: FouParams, t: float, tol: float) -> float:
    # lru_cache is thread-safe; a racing duplicate computation stores the same value
    return _spectral_single(params, t, tol)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_identifiability(box: EstimationBox, alpha: float) -> list[str]:
    """Warnings for each violated sufficient identifiability condition."""
    warns = []
    if alpha >= 1.0:
        warns.append(f"sampling step alpha={alpha:g} >= 1; injectivity needs alpha < 1")
    if box.hi.lam >= LAMBDA_IDENTIFIABILITY_BOUND:
        warns.append(
            f"lambda bound {box.hi.lam:g} exceeds exp(Psi(3))~{LAMBDA_IDENTIFIABILITY_BOUND:.2f}"
        )
    if not box.lo.sigma > 0.0:
        warns.append("box does not fix the sign of sigma; keep sigma > 0")
    return warns


def check_tail_switch(box: EstimationBox, switch: float = TAIL_SWITCH, tol: float = 1e-3) -> float:
    """Largest relative gap between exact and tail evaluators at lambda t = switch.

    Checked at the box corners and center; raises ``IntegrationError`` if the
    gap exceeds ``tol``.
    """
    Hs = sorted({box.lo.H, box.hi.H, 0.5 * (box.lo.H + box.hi.H)} - {0.5})
    worst = 0.0
    for H in Hs:
        p = FouParams(H, 1.0, 1.0)
        exact = fou_rho_closed(p, switch) if H > 0.5 else fou_rho_spectral(p, switch)
        approx = fou_rho_tail(p, switch, terms=TAIL_TERMS)
        worst = max(worst, abs(approx - exact) / abs(exact))
    if worst > tol:
        raise IntegrationError(f"tail expansion off by {worst:.2e} at lambda t = {switch}")
    return worst


def fit_tail_coefficient(params: FouParams, t_grid: Sequence[float] = (200.0, 400.0, 800.0)) -> float:
    """Empirical coefficient c in rho(t) ~ c t^(2H-2) from the spectral evaluator.

    Richardson-style: the ratio rho(t) / t^(2H-2) has an O(t^-2) correction, so
    extrapolate the last two grid points in 1/t^2.
    """
    t = np.asarray(t_grid, dtype=float)
    r = fou_rho_spectral(params, t, tol=1e-13) / t ** (2.0 * params.H - 2.0)
    x = t ** -2.0
    slope = (r[-1] - r[-2]) / (x[-1] - x[-2])
    return float(r[-1] - slope * x[-1])


# ---------------------------------------------------------------------------
# generic model interface
# ---------------------------------------------------------------------------

class CovarianceModel(ABC):
    """A parametric stationary covariance rho_theta(t), t >= 0.

    Subclasses expose ``param_names`` (the free parameters, in vector order)
    and ``rho(theta, t)`` where ``theta`` is a vector.
    """

    param_names: tuple[str, ...] = ()

    @property
    def param_dim(self) -> int:
        return len(self.param_names)

    @abstractmethod
    def rho(self, theta, t) -> np.ndarray:
        ...

    def rho_grid(self, theta, alpha: float, n: int) -> np.ndarray:
        """rho(alpha k) for k = 0..n-1."""
        return np.asarray(self.rho(theta, alpha * np.arange(n)), dtype=float)

    def params_as_vector(self, params) -> np.ndarray:
        return np.asarray(params, dtype=float)

    def vector_as_params(self, vec):
        return np.asarray(vec, dtype=float)

    def bounds(self, box) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = box
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    def fingerprint(self, theta) -> str:
        return f"{type(self).__name__}{tuple(np.round(np.asarray(theta, float), 12))}"


class FouModel(CovarianceModel):
    """fOU covariance with optionally pinned parameters.

    ``fixed`` maps any of ``"H"``, ``"lambda"``, ``"sigma"`` to a value held
    constant; the remaining names, in (H, lambda, sigma) order, form the free
    parameter vector.
    """

    def __init__(self, fixed: dict[str, float] | None = None, switch: float = TAIL_SWITCH,
                 method: str = "auto"):
        fixed = dict(fixed or {})
        unknown = set(fixed) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameter names {sorted(unknown)}")
        if method not in EVALUATORS:
            raise ValueError(f"method must be one of {EVALUATORS}, got {method!r}")
        self.fixed = fixed
        self.switch = switch
        self.method = method
        self.param_names = tuple(n for n in PARAM_NAMES if n not in fixed)
        if not self.param_names:
            raise ValueError("at least one parameter must be free")

    def __repr__(self):
        return f"FouModel(fixed={self.fixed!r}, method={self.method!r})"

    def fingerprint(self, theta) -> str:
        return super().fingerprint(theta) + f"|{self.method}|{sorted(self.fixed.items())}"

    def vector_as_params(self, vec) -> FouParams:
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        if vec.shape != (self.param_dim,):
            raise ValueError(f"expected {self.param_dim} free parameters, got shape {vec.shape}")
        vals = dict(self.fixed)
        vals.update(zip(self.param_names, vec))
        return FouParams(vals["H"], vals["lambda"], vals["sigma"])

    def params_as_vector(self, params: FouParams) -> np.ndarray:
        full = dict(zip(PARAM_NAMES, (params.H, params.lam, params.sigma)))
        return np.array([full[n] for n in self.param_names])

    def bounds(self, box: EstimationBox) -> tuple[np.ndarray, np.ndarray]:
        lo = dict(zip(PARAM_NAMES, box.lo))
        hi = dict(zip(PARAM_NAMES, box.hi))
        return (np.array([lo[n] for n in self.param_names]),
                np.array([hi[n] for n in self.param_names]))

    def rho(self, theta, t):
        params = self.vector_as_params(theta)
        if self.method == "closed":
            return fou_rho_closed(params, t)
        if self.method == "spectral":
            return fou_rho_spectral(params, t, tol=1e-11 * fou_var0(params))
        return rho(params, t, switch=self.switch)

    def rho_grid(self, theta, alpha: float, n: int) -> np.ndarray:
        if n > _GRID_CACHE_MAX_LAGS:
            return super().rho_grid(theta, alpha, n)
        key = tuple(float(x) for x in np.atleast_1d(theta))
        return _fou_grid(self, key, float(alpha), int(n))


# only short lag windows (the moment conditions) are memoized
_GRID_CACHE_MAX_LAGS = 64


@functools.lru_cache(maxsize=4096)
def _fou_grid(model: FouModel, key: tuple, alpha: float, n: int) -> np.ndarray:
    out = np.asarray(model.rho(np.array(key), alpha * np.arange(n)), dtype=float)
    out.setflags(write=False)
    return out
