"""Monte Carlo harness: simulate, estimate and summarize estimator accuracy.

A :class:`Scenario` fixes the true parameters, sampling design and the list
of filter counts ``L``.  For every ``L`` (a *cell*) ``m`` paths are simulated
and estimated; the cell reports

* ``mse``   -- mean squared distance of the estimates to the truth,
* ``e_var`` -- largest eigenvalue of their (m-1)-normalized covariance,
* ``bias_sq`` -- squared distance of their mean to the truth.

Paths depend only on ``(base_seed, scenario id, L, replication)`` so results
do not change with the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .covmodel import EstimationBox, FouModel, FouParams
from .errors import FouGmmError, NonConvergence
from .filters import FilterKind, build_bank
from .gmm import (Identity, MomentSpec, OptimizerConfig, OracleEfficient, TwoStep, estimate,
                  auto_weighting)
from .sampler import SeedPlan, factorize, sample_path, stable_hash

__all__ = [
    "Scenario",
    "CellResult",
    "ScenarioReport",
    "TableSet",
    "run_scenario",
    "run_table",
    "summarize",
    "MAX_FAILURE_FRACTION",
    "LOW_REPLICATION",
]

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.10
LOW_REPLICATION = 20
WEIGHTINGS = ("auto", "identity", "oracle", "two-step")


@dataclass(frozen=True)
class Scenario:
    """One simulation design and the filter counts to sweep.

    ``weighting`` is one of ``"auto"`` (``Omega^-1`` at the truth when there
    are more moments than parameters, identity otherwise), ``"identity"``,
    ``"oracle"`` or ``"two-step"``.  ``fixed`` pins parameters (e.g.
    ``{"lambda": 1.0}``) at the given values during estimation.
    """

    params_true: FouParams
    alpha: float = 0.1
    N: int = 1000
    m: int = 200
    L_values: tuple[int, ...] = (3,)
    filter_kind: FilterKind = FilterKind.FINITE_DIFFERENCE
    weighting: str = "auto"
    fixed: dict = field(default_factory=dict)
    box: EstimationBox = field(default_factory=EstimationBox.default)
    base_seed: int = 12345
    name: str = ""
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        object.__setattr__(self, "filter_kind", FilterKind(self.filter_kind))
        object.__setattr__(self, "L_values", tuple(int(L) for L in self.L_values))
        object.__setattr__(self, "fixed", dict(self.fixed or {}))
        if self.m < 2:
            raise ValueError("a scenario needs at least m = 2 replications")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        span = max(self._span(L) for L in self.L_values) if self.L_values else 0
        if self.N <= span:
            raise ValueError(f"N={self.N} must exceed the longest filter span {span}")
        model = self.model()
        lo, hi = model.bounds(self.box)
        v = model.params_as_vector(self.params_true)
        if not np.all((lo < v) & (v < hi)):
            raise ValueError("the box must contain the true parameters strictly")

    def _span(self, L: int) -> int:
        return L if self.filter_kind is FilterKind.FINITE_DIFFERENCE else 2 * L - 1

    def model(self) -> FouModel:
        return FouModel(fixed=self.fixed)

    @property
    def scenario_id(self) -> str:
        p = self.params_true
        fixed = ",".join(f"{k}={v:g}" for k, v in sorted(self.fixed.items()))
        return self.name or (f"H={p.H:g},lambda={p.lam:g},sigma={p.sigma:g},alpha={self.alpha:g},"
                             f"N={self.N},{self.filter_kind.value},{fixed}")

    def seed_plan(self, L: int) -> SeedPlan:
        return SeedPlan(self.base_seed, (stable_hash(self.scenario_id), int(L)))

    def moment_spec(self, L: int) -> MomentSpec:
        model = self.model()
        bank = build_bank(range(1, L + 1), self.filter_kind, p=model.param_dim)
        return MomentSpec(bank, model, self.alpha)

    def weighting_for(self, spec: MomentSpec):
        if self.weighting == "auto":
            return auto_weighting(spec, self.params_true)
        if self.weighting == "identity":
            return Identity()
        if self.weighting == "oracle":
            return OracleEfficient(self.params_true)
        return TwoStep()


@dataclass
class CellResult:
    """Metrics for one ``(scenario, L)`` cell."""

    L: int
    estimates: np.ndarray
    replications: np.ndarray
    failures: int
    boundary: int
    mse: float
    e_var: float
    bias_sq: float
    spread: float
    coverage: float
    weighting: str
    omega_ref: str
    wall_clock: float
    aborted: bool = False
    warnings: list = field(default_factory=list)

    @property
    def m_used(self) -> int:
        return int(self.estimates.shape[0])


@dataclass
class ScenarioReport:
    scenario: Scenario
    cells: dict
    metadata: dict

    def rows(self) -> list[dict]:
        p = self.scenario.params_true
        out = []
        for L, c in sorted(self.cells.items()):
            out.append(dict(H=p.H, **{"lambda": p.lam}, sigma=p.sigma, alpha=self.scenario.alpha,
                            N=self.scenario.N, L=L, mse=c.mse, e_var=c.e_var, bias_sq=c.bias_sq,
                            coverage=c.coverage, m_used=c.m_used, failures=c.failures,
                            boundary=c.boundary, weighting=c.weighting, aborted=c.aborted))
        return out

    def estimates_table(self, L: int) -> str:
        """CSV of per-replication estimates for one cell."""
        c = self.cells[L]
        names = self.scenario.model().param_names
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["replication", *names])
        for r, th in zip(c.replications, c.estimates):
            w.writerow([int(r), *(f"{x:.12g}" for x in th)])
        return buf.getvalue()


def summarize(estimates: np.ndarray, truth: np.ndarray) -> dict:
    """MSE, largest covariance eigenvalue, squared bias and spread of the estimates.

    ``mse == bias_sq + spread`` holds exactly up to rounding, with ``spread``
    the mean squared distance to the sample mean (1/m normalization);
    ``e_var`` uses the (m-1)-normalized covariance.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=float)
    m = est.shape[0]
    if m == 0:
        return dict(mse=math.nan, e_var=math.nan, bias_sq=math.nan, spread=math.nan)
    mean = est.mean(axis=0)
    mse = float(np.mean(np.sum((est - truth) ** 2, axis=1)))
    bias_sq = float(np.sum((mean - truth) ** 2))
    spread = float(np.mean(np.sum((est - mean) ** 2, axis=1)))
    if m > 1:
        cov = np.atleast_2d(np.cov(est, rowvar=False, ddof=1))
        e_var = float(np.max(np.linalg.eigvalsh(cov)))
    else:
        e_var = math.nan
    return dict(mse=mse, e_var=e_var, bias_sq=bias_sq, spread=spread)


def _estimate_batch(args):
    spec, fact, plan, reps, weighting, box, cfg, truth = args
    p = truth.size
    chi2 = stats.chi2.ppf(0.99, p)
    out = []
    for r in reps:
        traj = sample_path(fact, plan, r)
        try:
            fit = estimate(spec, traj, weighting, box, cfg)
        except NonConvergence:
            out.append((r, None, False, False, None))
            continue
        except FouGmmError as exc:
            log.warning("replication %d failed: %s", r, exc)
            out.append((r, None, False, False, None))
            continue
        covered = None
        d = fit.theta_vector - truth
        if np.all(np.isfinite(fit.asym_cov)):
            try:
                covered = bool(d @ np.linalg.solve(fit.asym_cov, d) <= chi2)
            except np.linalg.LinAlgError:
                covered = None
        out.append((r, fit.theta_vector, True, fit.boundary, covered))
    return out


def _chunks(seq: Sequence[int], n: int) -> list[list[int]]:
    n = max(1, min(n, len(seq)))
    size = math.ceil(len(seq) / n)
    return [list(seq[i:i + size]) for i in range(0, len(seq), size)]


def run_scenario(s: Scenario, workers: int = 1, progress=None) -> ScenarioReport:
    """Simulate and estimate every cell of a scenario.

    Cells run one after another; replications inside a cell are spread over
    ``workers`` processes.  Non-converged replications are dropped and
    counted; a cell with more than 10% failures is marked ``aborted`` and its
    metrics are NaN.
    """
    t_start = time.perf_counter()
    full = FouModel()
    fact = factorize(full, full.params_as_vector(s.params_true), s.N, s.alpha)
    cells = {}
    for L in s.L_values:
        t0 = time.perf_counter()
        spec = s.moment_spec(L)
        weighting = s.weighting_for(spec)
        truth = spec.model.params_as_vector(s.params_true)
        plan = s.seed_plan(L)
        reps = list(range(s.m))
        jobs = [(spec, fact, plan, chunk, weighting, s.box, s.optimizer, truth)
                for chunk in _chunks(reps, workers)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = [row for part in ex.map(_estimate_batch, jobs) for row in part]
        else:
            results = [row for job in jobs for row in _estimate_batch(job)]
        results.sort(key=lambda row: row[0])
        ok = [row for row in results if row[2]]
        failures = len(results) - len(ok)
        est = np.array([row[1] for row in ok]).reshape(len(ok), truth.size)
        cov_flags = [row[4] for row in ok if row[4] is not None]
        metrics = summarize(est, truth)
        warns = []
        if s.m < LOW_REPLICATION:
            warns.append(f"only m={s.m} replications; metrics are very noisy")
        aborted = failures > MAX_FAILURE_FRACTION * s.m
        if aborted:
            warns.append(f"{failures} of {s.m} replications failed to converge; cell aborted")
            metrics = dict(mse=math.nan, e_var=math.nan, bias_sq=math.nan, spread=math.nan)
        for w in warns:
            log.warning("%s L=%d: %s", s.scenario_id, L, w)
        cells[L] = CellResult(
            L=L,
            estimates=est,
            replications=np.array([row[0] for row in ok], dtype=int),
            failures=failures,
            boundary=sum(1 for row in ok if row[3]),
            coverage=float(np.mean(cov_flags)) if cov_flags else math.nan,
            weighting=getattr(weighting, "label", str(weighting)),
            omega_ref=("true parameters" if isinstance(weighting, OracleEfficient)
                       else "first-pass estimate" if isinstance(weighting, TwoStep) else "none"),
            wall_clock=time.perf_counter() - t0,
            aborted=aborted,
            warnings=warns,
            **metrics,
        )
        if progress is not None:
            progress(s, cells[L])
    meta = dict(
        e_var_normalization="m-1",
        spread_normalization="m",
        coverage_region="ellipsoid (est - truth)' asym_cov^-1 (est - truth) <= chi2_{p,0.99}",
        jitter=fact.jitter,
        base_seed=s.base_seed,
        scenario_id=s.scenario_id,
        wall_clock=time.perf_counter() - t_start,
    )
    return ScenarioReport(s, cells, meta)


@dataclass
class TableSet:
    markdown: str
    csv: str


def _fmt(x: float) -> str:
    if not np.isfinite(x):
        return "nan"
    if x != 0 and abs(x) < 1e-3:
        return f"{x:.2e}"
    return f"{x:.3f}"


def run_table(reports: Iterable[ScenarioReport]) -> TableSet:
    """Markdown and CSV tables: rows ``H x L``, one column block per ``(lambda, sigma)``."""
    reports = list(reports)
    rows = [r for rep in reports for r in rep.rows()]
    buf = io.StringIO()
    fields = ["H", "lambda", "sigma", "alpha", "N", "L", "mse", "e_var", "bias_sq", "coverage",
              "m_used", "failures", "boundary", "weighting", "aborted"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if not rows:
        return TableSet("", buf.getvalue())

    # column blocks in the order the sub-scenarios first appear
    blocks = list(dict.fromkeys((r["lambda"], r["sigma"]) for r in rows))
    index = {(r["H"], r["L"], r["lambda"], r["sigma"]): r for r in rows}
    HL = sorted({(r["H"], r["L"]) for r in rows})
    head = ["H", "L"]
    for lam, sig in blocks:
        tag = f"lambda={lam:g}, sigma={sig:g}"
        head += [f"MSE ({tag})", f"e(Var) ({tag})", f"Bias^2 ({tag})"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    prev_H = None
    for H, L in HL:
        cells = [f"{H:g}" if H != prev_H else "", str(L)]
        prev_H = H
        for lam, sig in blocks:
            r = index.get((H, L, lam, sig))
            cells += ["" if r is None else _fmt(r[k]) for k in ("mse", "e_var", "bias_sq")]
        lines.append("| " + " | ".join(cells) + " |")
    return TableSet("\n".join(lines) + "\n", buf.getvalue())
