"""Exact Gaussian simulation on an equally spaced grid via Cholesky factorization.

Each replication draws its normals from its own ``SeedSequence`` child, so a
path depends only on ``(base_seed, key, replication)`` and never on how the
replications are split between workers.
"""
from __future__ import annotations

import threading
import zlib
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import lapack, toeplitz

from .covmodel import CovarianceModel, FouParams
from .errors import NotPositiveDefinite
from .gmm import Trajectory

__all__ = [
    "CovarianceFactorization",
    "SeedPlan",
    "stable_hash",
    "factorize",
    "factorize_matrix",
    "sample_path",
    "sample_matrix",
    "clear_cache",
]

JITTER = 1e-12


@dataclass(frozen=True)
class CovarianceFactorization:
    """Lower Cholesky factor of ``[rho(alpha |i - j|)]`` for ``i, j = 0..N``."""

    lower: np.ndarray
    N: int
    alpha: float
    fingerprint: str
    rho0: float
    jitter: float = 0.0

    def reconstruction_error(self, n_checks: int = 64, seed: int = 0) -> float:
        """Max ``|(L L')_ij - rho(alpha|i-j|)|`` over random entries, relative to ``rho(0)``.

        The target entries are recovered from the first row, which is never
        touched by the factorization apart from jitter on the diagonal.
        """
        rng = np.random.default_rng(seed)
        n = self.N + 1
        i = rng.integers(0, n, n_checks)
        j = rng.integers(0, n, n_checks)
        L = self.lower
        approx = np.einsum("ij,ij->i", L[i], L[j])
        # first column of L times L[0,0] reproduces the first covariance row
        row0 = L[:, 0] * L[0, 0]
        target = row0[np.abs(i - j)]
        return float(np.max(np.abs(approx - target)) / self.rho0)


def stable_hash(*parts) -> int:
    """Process-independent 32-bit hash of the ``repr`` of ``parts``."""
    return zlib.crc32(repr(parts).encode())


@dataclass(frozen=True)
class SeedPlan:
    """Derives one independent normal stream per replication.

    Stream ``r`` is ``SeedSequence(base_seed, spawn_key=key + (r,))``; the key
    identifies the cell (scenario, filter count, ...).
    """

    base_seed: int
    key: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "key", tuple(int(k) for k in self.key))

    def generator(self, replication: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.base_seed), spawn_key=self.key + (int(replication),))
        return np.random.default_rng(ss)

    def child(self, *extra: int) -> "SeedPlan":
        return SeedPlan(self.base_seed, self.key + tuple(int(e) for e in extra))


def factorize_matrix(cov: np.ndarray, rho0: float | None = None) -> tuple[np.ndarray, float]:
    """Cholesky factor of ``cov``, retrying once with ``1e-12 * rho0`` diagonal jitter.

    Returns ``(lower, jitter_used)``.  Raises :class:`NotPositiveDefinite`
    with the 0-based failing pivot.
    """
    rho0 = float(cov[0, 0]) if rho0 is None else rho0
    c, info = lapack.dpotrf(cov, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        return c, 0.0
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    first_pivot = info - 1
    jittered = cov + JITTER * rho0 * np.eye(cov.shape[0])
    c, info = lapack.dpotrf(jittered, lower=1, clean=1, overwrite_a=1)
    if info == 0:
        return c, JITTER
    raise NotPositiveDefinite(first_pivot)


_CACHE: "OrderedDict[tuple, CovarianceFactorization]" = OrderedDict()
_CACHE_LOCK = threading.Lock()
_CACHE_SIZE = 2


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def factorize(model: CovarianceModel, theta, N: int, alpha: float, cache: bool = True) -> CovarianceFactorization:
    """Factorize the ``(N+1) x (N+1)`` Toeplitz covariance of the grid ``0, alpha, ..., N alpha``.

    Recent factorizations are kept in a small cache keyed by model
    fingerprint, ``N`` and ``alpha``.
    """
    if isinstance(theta, FouParams):
        theta = model.params_as_vector(theta)
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    fp = model.fingerprint(theta)
    key = (fp, N, float(alpha))
    if cache:
        with _CACHE_LOCK:
            hit = _CACHE.get(key)
            if hit is not None:
                _CACHE.move_to_end(key)
                return hit
    r = np.asarray(model.rho(theta, alpha * np.arange(N + 1)), dtype=float)
    lower, jit = factorize_matrix(toeplitz(r), rho0=float(r[0]))
    lower.setflags(write=False)
    fact = CovarianceFactorization(lower, N, float(alpha), fp, float(r[0]), jit)
    if cache:
        with _CACHE_LOCK:
            _CACHE[key] = fact
            while len(_CACHE) > _CACHE_SIZE:
                _CACHE.popitem(last=False)
    return fact


def _draw(fact: CovarianceFactorization, plan: SeedPlan, replication: int) -> np.ndarray:
    z = plan.generator(replication).standard_normal(fact.N + 1)
    # one matrix-vector product per path keeps results independent of batching
    return fact.lower @ z


def sample_path(fact: CovarianceFactorization, seed_plan: SeedPlan, replication: int) -> Trajectory:
    """Path ``X = L z`` for the replication's normal stream."""
    return Trajectory(_draw(fact, seed_plan, replication), fact.alpha)


def sample_matrix(fact: CovarianceFactorization, seed_plan: SeedPlan, replications: Iterable[int]) -> np.ndarray:
    """Stack of paths, one row per replication (same values as :func:`sample_path`)."""
    reps = list(replications)
    out = np.empty((len(reps), fact.N + 1))
    for i, r in enumerate(reps):
        out[i] = _draw(fact, seed_plan, r)
    return out
