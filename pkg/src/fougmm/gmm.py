"""GMM estimation from squared filtered observations.

For each filter ``a`` in a bank, the filtered series ``phi_i = sum_q a_q X_{i-q}``
satisfies ``E[phi^2] = V(theta) = sum_k b_k rho_theta(alpha k)``.  The
estimator minimizes ``g' A g`` where ``g`` is the vector of sample means of
``phi^2`` minus ``V(theta)``.

The model enters only through :class:`~fougmm.covmodel.CovarianceModel`, so
the code here works for any stationary covariance; the fOU-specific helpers
(order check, rate diagnostic) are kept at the bottom.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.stats import qmc

from .covmodel import CovarianceModel, EstimationBox, FouModel, FouParams, tail_coefficient
from .errors import DomainError, NonConvergence, NonConvergentTail, RankDeficient
from .filters import FilterBank, coefficient_correlation, order_condition_violations

__all__ = [
    "Trajectory",
    "MomentSpec",
    "Identity",
    "OracleEfficient",
    "TwoStep",
    "Weighting",
    "auto_weighting",
    "OptimizerConfig",
    "OmegaResult",
    "GmmFit",
    "filtered_series",
    "sample_moments",
    "v_theta",
    "g_hat",
    "objective",
    "omega",
    "g_gradient",
    "estimate",
    "sandwich_covariance",
    "RateReport",
    "rate_diagnostic",
    "rate_limits",
    "deterministic_order0_variance",
]

log = logging.getLogger(__name__)

_FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class Trajectory:
    """Equally spaced observations ``X_0..X_N`` with sampling step ``alpha``."""

    values: np.ndarray
    alpha: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 2:
            raise DomainError("a trajectory needs at least two observations")
        if not np.all(np.isfinite(v)):
            raise DomainError("trajectory contains non-finite values")
        if not self.alpha > 0:
            raise DomainError("sampling step alpha must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def N(self) -> int:
        return self.values.size - 1

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class MomentSpec:
    """A filter bank, a covariance model and the sampling step.

    Construction checks that ``B`` has rank at least the number of free
    model parameters.
    """

    bank: FilterBank
    model: CovarianceModel
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("sampling step alpha must be positive")
        self.bank.require_rank(self.model.param_dim)

    @property
    def n_moments(self) -> int:
        return self.bank.n_filters

    @property
    def n_params(self) -> int:
        return self.model.param_dim

    @property
    def span(self) -> int:
        return self.bank.span

    def n_terms(self, traj: Trajectory) -> int:
        """Number of averaged terms ``N - L + 1``."""
        return traj.N - self.span + 1

    def as_vector(self, theta) -> np.ndarray:
        if isinstance(theta, FouParams):
            return self.model.params_as_vector(theta)
        return np.atleast_1d(np.asarray(theta, dtype=float))

    def order_warnings(self, H_max: float) -> list[str]:
        """Filter pairs whose squared outputs lose the normal limit for H up to ``H_max``."""
        bad = order_condition_violations(self.bank.orders, H_max)
        return [f"orders ({a}, {b}) need H < 3/4 for a normal limit; box allows H up to {H_max:g}"
                for a, b in bad]


# ---------------------------------------------------------------------------
# weighting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    label: str = field(default="identity", init=False)


@dataclass(frozen=True)
class OracleEfficient:
    """``A = Omega(theta_ref)^-1`` at a supplied reference parameter."""

    theta_ref: object
    K_max: int = 20000
    label: str = field(default="oracle", init=False)


@dataclass(frozen=True)
class TwoStep:
    """Identity-weighted first pass, then ``A = Omega(theta_1)^-1``."""

    K_max: int = 20000
    label: str = field(default="two-step", init=False)


Weighting = Identity | OracleEfficient | TwoStep


def auto_weighting(spec: MomentSpec, theta_true) -> Weighting:
    """``Omega^-1`` at the true parameter when over-identified, identity otherwise."""
    if spec.n_moments > spec.n_params:
        return OracleEfficient(theta_true)
    return Identity()


def _inverse_spd(M: np.ndarray) -> np.ndarray:
    c, low = linalg.cho_factor(M, lower=True)
    inv = linalg.cho_solve((c, low), np.eye(M.shape[0]))
    return 0.5 * (inv + inv.T)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def filtered_series(traj: Trajectory, f) -> np.ndarray:
    """``phi(t_i) = sum_q a_q X_{i-q}`` for ``i = L..N``."""
    a = f.coeffs
    if traj.values.size <= a.size - 1:
        raise DomainError(f"trajectory of length {traj.values.size} is too short for a filter of span {a.size - 1}")
    return np.convolve(traj.values, a, mode="valid")


def sample_moments(spec: MomentSpec, traj: Trajectory) -> np.ndarray:
    """Mean of ``phi_l^2`` over ``i = L..N`` for every filter ``l``."""
    if traj.N < spec.span:
        raise DomainError("trajectory is shorter than the filter bank span")
    return np.array([np.mean(filtered_series(traj, f) ** 2) for f in spec.bank.filters])


def v_theta(spec: MomentSpec, theta) -> np.ndarray:
    """Model moments ``V_l(theta) = sum_k b_k rho(alpha k)``."""
    r = spec.model.rho_grid(spec.as_vector(theta), spec.alpha, spec.span + 1)
    return spec.bank.B_matrix @ r


def g_hat(spec: MomentSpec, traj: Trajectory, theta) -> np.ndarray:
    """Sample minus model moments."""
    return sample_moments(spec, traj) - v_theta(spec, theta)


def objective(spec: MomentSpec, traj: Trajectory, theta, A) -> float:
    """Quadratic form ``g' A g``."""
    g = g_hat(spec, traj, theta)
    A = np.asarray(A, dtype=float)
    if A.shape != (g.size, g.size):
        raise DomainError(f"weighting matrix has shape {A.shape}, expected {(g.size, g.size)}")
    return float(g @ A @ g)


def _v_jacobian(spec: MomentSpec, theta: np.ndarray, scale: float = 1.0,
                lo: np.ndarray | None = None, hi: np.ndarray | None = None) -> np.ndarray:
    """Finite-difference ``dV/dtheta`` (L x p).

    Central differences with step ``cbrt(eps) max(|theta_j|, 1)``; when a
    bound ``lo``/``hi`` would be crossed the second-order one-sided stencil
    pointing into the box is used instead.
    """
    p = theta.size
    J = np.empty((spec.n_moments, p))
    for j in range(p):
        h = scale * _FD_STEP * max(abs(theta[j]), 1.0)
        below = lo is not None and theta[j] - h < lo[j]
        above = hi is not None and theta[j] + h > hi[j]
        if below == above:
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            J[:, j] = (v_theta(spec, up) - v_theta(spec, dn)) / (up[j] - dn[j])
            continue
        step = h if below else -h
        t1, t2 = theta.copy(), theta.copy()
        t1[j] += step
        t2[j] += 2.0 * step
        J[:, j] = (-3.0 * v_theta(spec, theta) + 4.0 * v_theta(spec, t1) - v_theta(spec, t2)) / (2.0 * step)
    return J


def g_gradient(spec: MomentSpec, theta, check: bool = False) -> np.ndarray:
    """``G(theta) = -dV/dtheta`` by central differences.

    With ``check=True`` the derivative is recomputed with half the step and a
    ``RuntimeWarning`` is issued if the two differ by more than 1e-5
    relative.  A rank-deficient result raises :class:`RankDeficient`.
    """
    theta = spec.as_vector(theta)
    G = -_v_jacobian(spec, theta)
    if check:
        G2 = -_v_jacobian(spec, theta, scale=0.5)
        rel = np.max(np.abs(G2 - G)) / max(np.max(np.abs(G)), 1e-300)
        if rel > 1e-5:
            warnings.warn(f"finite-difference gradient unstable under step halving ({rel:.1e})",
                          RuntimeWarning, stacklevel=2)
    s = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if s[0] > 0 else 0
    if rank < G.shape[1]:
        raise RankDeficient(rank, G.shape[1], f"G(theta) has rank {rank} < {G.shape[1]}")
    return G


# ---------------------------------------------------------------------------
# long-run covariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OmegaResult:
    matrix: np.ndarray
    K: int
    error_estimate: float
    converged: bool


def omega(spec: MomentSpec, theta, K_max: int = 20000, tol: float = 1e-10,
          full_output: bool = False, K_start: int = 256):
    """Long-run covariance ``Omega_ij = 2 sum_k gamma_ij(k)^2``.

    ``gamma_ij(k) = sum_{q,q'} a^i_q a^j_q' rho(alpha |k - q + q'|)`` is the
    cross-covariance of the filtered series.  The lag window ``|k| <= K`` is
    doubled from ``K_start`` until the change of every entry, relative to
    ``sqrt(Omega_ii Omega_jj)``, is at most ``tol`` (the change over the last
    doubling bounds the remaining tail for the power-law decay met here), or
    until ``K_max``.

    Raises
    ------
    NonConvergentTail
        The increment is still above ``tol`` at ``K_max``.
    """
    theta = spec.as_vector(theta)
    span = spec.span
    nf = spec.n_moments
    corr = {(i, j): coefficient_correlation(spec.bank.filters[i], spec.bank.filters[j])
            for i in range(nf) for j in range(i, nf)}
    K = min(K_start, K_max)
    r = np.empty(0)
    prev = None
    while True:
        need = K + span + 1
        if r.size < need:
            extra = spec.model.rho(theta, spec.alpha * np.arange(r.size, need))
            r = np.concatenate([r, np.atleast_1d(extra)])
        two_sided = np.concatenate([r[need - 1:0:-1], r[:need]])
        M = np.empty((nf, nf))
        for (i, j), c in corr.items():
            gamma = np.convolve(two_sided, c, mode="valid")
            M[i, j] = M[j, i] = 2.0 * np.dot(gamma, gamma)
        if prev is not None:
            d = np.sqrt(np.abs(np.diag(M)))
            scale = np.maximum(np.outer(d, d), 1e-300)
            err = float(np.max(np.abs(M - prev) / scale))
            if err <= tol:
                res = OmegaResult(M, K, err, True)
                break
            if K >= K_max:
                raise NonConvergentTail(
                    f"Omega lag sum changed by {err:.2e} (relative) at K_max={K_max}; tol={tol:.1e}")
        prev = M
        if K >= K_max:
            # K_start == K_max: a single window, no increment available
            res = OmegaResult(M, K, float("nan"), False)
            break
        K = min(2 * K, K_max)
    return res if full_output else res.matrix


def sandwich_covariance(G: np.ndarray, A: np.ndarray, Om: np.ndarray, n: int) -> np.ndarray:
    """Covariance of the estimator: ``C Omega C' / n`` with ``C = (G'AG)^-1 G'A``."""
    GA = G.T @ A
    C = np.linalg.solve(GA @ G, GA)
    cov = C @ Om @ C.T / n
    return 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the multi-start box-constrained quasi-Newton search.

    Starting points are the box center plus ``n_lhs`` Latin-hypercube points
    drawn with ``lhs_seed``.  Solutions within ``boundary_tol`` (relative box
    width) of an edge are flagged.
    """

    n_lhs: int = 4
    lhs_seed: int = 20240611
    maxiter: int = 500
    ftol: float = 1e-15
    gtol: float = 1e-12
    boundary_tol: float = 1e-6
    compute_cov: bool = True
    omega_tol: float = 1e-10


@dataclass
class StartRecord:
    start: np.ndarray
    theta: np.ndarray
    objective: float
    iterations: int
    status: int
    message: str


@dataclass
class GmmFit:
    """Result of :func:`estimate`.

    ``asym_cov`` is the covariance of ``theta_vector`` (already divided by
    the number of averaged terms); it is NaN when it could not be computed.
    """

    theta_hat: object
    theta_vector: np.ndarray
    param_names: tuple[str, ...]
    objective: float
    weighting: str
    weighting_used: np.ndarray
    asym_cov: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float
    boundary: bool
    n_terms: int
    omega_ref: str = ""
    trace: list = field(default_factory=list, repr=False)
    first_pass: "GmmFit | None" = field(default=None, repr=False)
    message: str = ""

    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.asym_cov), 0.0, None))

    def summary(self) -> str:
        lines = [f"GMM fit ({self.weighting} weighting, {self.n_terms} terms)"]
        se = self.std_errors()
        for name, v, s in zip(self.param_names, self.theta_vector, se):
            lines.append(f"  {name:<7s} {v: .6f}  (se {s:.6f})")
        lines.append(f"  objective {self.objective:.6e}  iterations {self.iterations}  "
                     f"converged {self.converged}  |grad| {self.grad_norm:.2e}")
        if self.boundary:
            lines.append("  warning: estimate on the box boundary; asymptotic covariance unreliable")
        return "\n".join(lines)


def _box_arrays(spec: MomentSpec, box) -> tuple[np.ndarray, np.ndarray]:
    if box is None:
        box = EstimationBox.default()
    lo, hi = spec.model.bounds(box)
    return np.asarray(lo, float), np.asarray(hi, float)


def _minimize(spec: MomentSpec, m_hat: np.ndarray, A: np.ndarray, lo, hi, starts, cfg: OptimizerConfig):
    width = hi - lo

    def to_theta(u):
        return lo + np.clip(u, 0.0, 1.0) * width

    center = 0.5 * (lo + hi)
    g0 = m_hat - v_theta(spec, center)
    scale = max(float(g0 @ A @ g0), 1e-300)

    def fun(u):
        th = to_theta(u)
        g = m_hat - v_theta(spec, th)
        J = _v_jacobian(spec, th, lo=lo, hi=hi)
        q = float(g @ A @ g)
        grad = -2.0 * (J.T @ (A @ g)) * width
        return q / scale, grad / scale

    records = []
    for s in starts:
        u0 = (s - lo) / width
        res = optimize.minimize(fun, u0, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * lo.size,
                                options=dict(maxiter=cfg.maxiter, ftol=cfg.ftol, gtol=cfg.gtol))
        th = to_theta(res.x)
        records.append(StartRecord(s, th, float(res.fun) * scale, int(res.nit), int(res.status),
                                   str(res.message)))
    return records, scale, fun


def _start_points(lo, hi, cfg: OptimizerConfig) -> list[np.ndarray]:
    pts = [0.5 * (lo + hi)]
    if cfg.n_lhs > 0:
        u = qmc.LatinHypercube(d=lo.size, seed=cfg.lhs_seed).random(cfg.n_lhs)
        pts.extend(lo + row * (hi - lo) for row in u)
    return pts


def _projected_grad(u_grad: np.ndarray, u: np.ndarray) -> np.ndarray:
    pg = u_grad.copy()
    pg[(u <= 0.0) & (pg > 0)] = 0.0
    pg[(u >= 1.0) & (pg < 0)] = 0.0
    return pg


def _single_pass(spec, m_hat, A, lo, hi, starts, cfg, n_terms, label, omega_ref=""):
    records, scale, fun = _minimize(spec, m_hat, A, lo, hi, starts, cfg)
    best = min(records, key=lambda r: r.objective)
    u = (best.theta - lo) / (hi - lo)
    _, ug = fun(u)
    grad_norm = float(np.linalg.norm(_projected_grad(ug * scale, u)))
    converged = best.status != 1 and np.isfinite(best.objective)
    near = np.minimum(u, 1.0 - u) <= cfg.boundary_tol
    return GmmFit(
        theta_hat=_to_params(spec, best.theta),
        theta_vector=best.theta,
        param_names=tuple(spec.model.param_names),
        objective=best.objective,
        weighting=label,
        weighting_used=A,
        asym_cov=np.full((lo.size, lo.size), np.nan),
        iterations=sum(r.iterations for r in records),
        converged=bool(converged),
        grad_norm=grad_norm,
        boundary=bool(np.any(near)),
        n_terms=n_terms,
        omega_ref=omega_ref,
        trace=records,
        message=best.message,
    )


def _fmt_vec(v) -> str:
    return "(" + ", ".join(f"{x:.8g}" for x in np.asarray(v, dtype=float)) + ")"


def _to_params(spec: MomentSpec, vec):
    try:
        return spec.model.vector_as_params(vec)
    except DomainError:
        return np.asarray(vec)


def estimate(spec: MomentSpec, traj: Trajectory, weighting: Weighting | None = None,
             box: EstimationBox | None = None, optimizer_cfg: OptimizerConfig | None = None) -> GmmFit:
    """Minimize ``g' A g`` over the box.

    Each pass runs L-BFGS-B from every start (box center plus Latin-hypercube
    points) in coordinates rescaled to the unit cube and keeps the lowest
    objective.  The objective gradient ``-2 (dV/dtheta)' A g`` uses central
    differences of ``V``.  For :class:`TwoStep` a second pass with
    ``A = Omega(theta_1)^-1`` is started from the first-pass estimate and the
    box center.

    Raises
    ------
    NonConvergence
        The best start stopped on the iteration limit.  The partial fit is
        attached as ``err.fit``.
    """
    weighting = TwoStep() if weighting is None else weighting
    cfg = optimizer_cfg or OptimizerConfig()
    if abs(traj.alpha - spec.alpha) > 1e-12 * spec.alpha:
        raise DomainError(f"trajectory step {traj.alpha} differs from moment spec step {spec.alpha}")
    lo, hi = _box_arrays(spec, box)
    if isinstance(spec.model, FouModel) and "H" in spec.model.param_names:
        for w in spec.order_warnings(float(hi[spec.model.param_names.index("H")])):
            warnings.warn(w, RuntimeWarning, stacklevel=2)
    m_hat = sample_moments(spec, traj)
    n = spec.n_terms(traj)
    starts = _start_points(lo, hi, cfg)
    first = None

    if isinstance(weighting, Identity):
        fit = _single_pass(spec, m_hat, np.eye(spec.n_moments), lo, hi, starts, cfg, n, "identity")
    elif isinstance(weighting, OracleEfficient):
        ref = spec.as_vector(weighting.theta_ref)
        A = _inverse_spd(omega(spec, ref, K_max=weighting.K_max, tol=cfg.omega_tol))
        fit = _single_pass(spec, m_hat, A, lo, hi, starts, cfg, n, "oracle",
                           omega_ref=f"theta_ref={_fmt_vec(ref)}")
    elif isinstance(weighting, TwoStep):
        first = _single_pass(spec, m_hat, np.eye(spec.n_moments), lo, hi, starts, cfg, n, "identity")
        A = _inverse_spd(omega(spec, first.theta_vector, K_max=weighting.K_max, tol=cfg.omega_tol))
        fit = _single_pass(spec, m_hat, A, lo, hi, [first.theta_vector, starts[0]], cfg, n,
                           "two-step", omega_ref=f"first-pass theta={_fmt_vec(first.theta_vector)}")
        fit.first_pass = first
        fit.iterations += first.iterations
    else:
        raise TypeError(f"unknown weighting {weighting!r}")

    if cfg.compute_cov:
        try:
            G = -_v_jacobian(spec, fit.theta_vector, lo=lo, hi=hi)
            Om = omega(spec, fit.theta_vector, tol=cfg.omega_tol)
            fit.asym_cov = sandwich_covariance(G, fit.weighting_used, Om, n)
        except (np.linalg.LinAlgError, NonConvergentTail, DomainError) as exc:
            log.debug("asymptotic covariance unavailable: %s", exc)
    if not fit.converged:
        err = NonConvergence(f"optimizer stopped on the iteration limit: {fit.message}")
        err.fit = fit
        raise err
    return fit


# ---------------------------------------------------------------------------
# variance-rate diagnostic for the order-0 moment
# ---------------------------------------------------------------------------

def deterministic_order0_variance(params: FouParams, alpha: float, N: int, model=None) -> float:
    """Exact ``Var(mean(X_i^2) - rho(0))`` over ``i = 0..N``: ``(2/n^2) sum_ij rho(alpha|i-j|)^2``."""
    model = model or FouModel()
    n = N + 1
    r = np.asarray(model.rho(model.params_as_vector(params), alpha * np.arange(n)))
    k = np.arange(1, n)
    total = n * r[0] ** 2 + 2.0 * np.sum((n - k) * r[1:] ** 2)
    return float(2.0 * total / n ** 2)


@dataclass
class RateReport:
    """Scaled variances of the order-0 moment along a grid of sample sizes.

    ``rate[i]`` is ``N/log N`` (H = 3/4) or ``N^(4-4H)`` (H > 3/4).
    ``limit_exact`` uses the numerically confirmed tail coefficient and
    ``limit_alt`` the ``sigma^2 H (2H-1)/lambda`` normalization with the
    smaller constant ``2 c^2 / alpha`` for H = 3/4.
    """

    params: FouParams
    alpha: float
    N_grid: list
    rate: np.ndarray
    deterministic: np.ndarray
    empirical: np.ndarray
    limit_exact: float
    limit_alt: float
    m: int

    def successive_ratios(self) -> np.ndarray:
        d = self.deterministic
        return d[1:] / d[:-1]

    def table(self) -> str:
        rows = ["N, rate, scaled exact variance, scaled Monte Carlo variance"]
        for N, r, d, e in zip(self.N_grid, self.rate, self.deterministic, self.empirical):
            rows.append(f"{N}, {r:.6g}, {d:.6g}, {e:.6g}")
        rows.append(f"limit (exact tail coefficient): {self.limit_exact:.6g}")
        rows.append(f"limit (lambda^-1 coefficient): {self.limit_alt:.6g}")
        return "\n".join(rows)


def _rate(H: float, N: int) -> float:
    if math.isclose(H, 0.75):
        return N / math.log(N)
    return float(N) ** (4.0 - 4.0 * H)


def rate_limits(params: FouParams, alpha: float) -> tuple[float, float]:
    """Limit constants of the scaled variance, for the exact and the lambda^-1 tail coefficients."""
    H = params.H
    c_ex = tail_coefficient(params, "exact")
    c_alt = tail_coefficient(params, "lambda1")
    if math.isclose(H, 0.75):
        # (4/n) sum_k c^2 (alpha k)^-1 ~ 4 c^2 log n / (alpha n); alternative: 2 c^2 / alpha
        return 4.0 * c_ex ** 2 / alpha, 2.0 * c_alt ** 2 / alpha
    k = 2.0 * alpha ** (4.0 * H - 4.0) / ((2.0 * H - 1.0) * (4.0 * H - 3.0))
    return k * c_ex ** 2, k * c_alt ** 2


def rate_diagnostic(params: FouParams, alpha: float, N_grid: Sequence[int] = (1000, 2000, 4000),
                    m: int = 200, seed: int = 0, workers: int = 1) -> RateReport:
    """Scaled variance of ``mean(X_i^2) - rho(0)`` as N grows, for H >= 3/4.

    For each N, reports the exact double-sum variance and the Monte Carlo
    variance over ``m`` simulated paths (skipped when ``m == 0``), both times
    the theoretical rate.
    """
    if params.H < 0.75 and not math.isclose(params.H, 0.75):
        raise DomainError("the rate diagnostic applies to H >= 3/4")
    from .sampler import SeedPlan, factorize, sample_matrix

    model = FouModel()
    theta = model.params_as_vector(params)
    N_grid = [int(N) for N in N_grid]
    rate = np.array([_rate(params.H, N) for N in N_grid])
    det = np.array([deterministic_order0_variance(params, alpha, N, model) for N in N_grid])
    emp = np.full(len(N_grid), np.nan)
    if m > 0:
        r0 = float(model.rho(theta, 0.0))
        for i, N in enumerate(N_grid):
            fact = factorize(model, theta, N, alpha)
            plan = SeedPlan(seed, (N,))
            X = sample_matrix(fact, plan, range(m))
            g0 = np.mean(X ** 2, axis=1) - r0
            emp[i] = np.var(g0, ddof=1)
            del fact, X
    lim_ex, lim_pub = rate_limits(params, alpha)
    return RateReport(params, alpha, N_grid, rate, det * rate, emp * rate, lim_ex, lim_pub, m)
