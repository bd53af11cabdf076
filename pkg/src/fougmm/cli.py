"""Command-line interface: ``fougmm <subcommand> [options]``.

Exit codes: 0 success, 2 usage error, 3 data or parse error, 4 numerical
failure, 5 failed check, 6 estimate on the box boundary.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .covmodel import (EstimationBox, FouModel, FouParams, check_identifiability, check_tail_switch)
from .errors import DomainError, FouGmmError, NonConvergence, RankDeficient
from .filters import FilterKind, build_bank, order_condition_violations
from .gmm import (Identity, MomentSpec, OracleEfficient, Trajectory, TwoStep, estimate, omega,
                  auto_weighting, rate_diagnostic)
from .montecarlo import run_scenario, run_table
from .sampler import SeedPlan, factorize, sample_matrix

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_CHECK = 5
EXIT_BOUNDARY = 6

log = logging.getLogger("fougmm")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _add_config(p):
    p.add_argument("--config", type=Path, help="YAML config file; flags override its values")


def _add_params(p, with_alpha=True):
    g = p.add_argument_group("model parameters")
    g.add_argument("--H", type=float, help="Hurst exponent in (0, 1)")
    g.add_argument("--lambda", dest="lam", type=float, help="mean-reversion rate (> 0)")
    g.add_argument("--sigma", type=float, help="diffusion scale (> 0)")
    if with_alpha:
        g.add_argument("--alpha", type=float, help="sampling step (> 0)")


def _add_box(p):
    g = p.add_argument_group("estimation box")
    g.add_argument("--box-H", nargs=2, type=float, metavar=("LO", "HI"), help="bounds for H")
    g.add_argument("--box-lambda", nargs=2, type=float, metavar=("LO", "HI"), help="bounds for lambda")
    g.add_argument("--box-sigma", nargs=2, type=float, metavar=("LO", "HI"), help="bounds for sigma")


def _add_filters(p):
    g = p.add_argument_group("filter bank")
    g.add_argument("--filter-kind", choices=[k.value for k in FilterKind], help="filter family")
    g.add_argument("--orders", type=int, nargs="+", metavar="ORDER", help="filter orders, e.g. 1 2 3")
    g.add_argument("--L", type=int, help="use orders 1..L (overrides --orders)")


def _apply_overrides(cfg: dict, args) -> dict:
    m = cfg["model"]
    for attr, key in (("H", "H"), ("lam", "lambda"), ("sigma", "sigma")):
        v = getattr(args, attr, None)
        if v is not None:
            m[key] = v
    if getattr(args, "alpha", None) is not None:
        cfg["alpha"] = args.alpha
    for name in ("H", "lambda", "sigma"):
        v = getattr(args, f"box_{name}", None)
        if v is not None:
            cfg["box"][name] = list(v)
    if getattr(args, "filter_kind", None):
        cfg["filters"]["kind"] = args.filter_kind
    if getattr(args, "L", None):
        cfg["filters"]["orders"] = list(range(1, args.L + 1))
    elif getattr(args, "orders", None):
        cfg["filters"]["orders"] = list(args.orders)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        cfg["threads"] = args.threads
    if getattr(args, "method", None):
        cfg["model"]["method"] = args.method
    return cfg


def _params(cfg) -> FouParams:
    try:
        return cfgmod.params_from(cfg)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _box(cfg) -> EstimationBox:
    try:
        return cfgmod.box_from(cfg)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _alpha(cfg) -> float:
    a = float(cfg["alpha"])
    if not a > 0:
        raise UsageError("alpha must be positive")
    return a


def _parse_fix(items) -> dict:
    out = {}
    for item in items or []:
        name, _, value = item.partition("=")
        name = name.strip()
        if name not in ("H", "lambda", "sigma") or not value:
            raise UsageError(f"--fix expects NAME=VALUE with NAME in H, lambda, sigma; got {item!r}")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise UsageError(f"--fix value {value!r} is not a number") from exc
    return out


def _print_warnings(cfg, box, alpha, out=sys.stderr):
    for w in check_identifiability(box, alpha):
        print(f"warning: {w}", file=out)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _apply_overrides(cfgmod.load_config(args.config), args)
    params = _params(cfg)
    alpha = _alpha(cfg)
    if args.n < 1 or args.m < 1:
        raise UsageError("--n and --m must be positive")
    method = cfg["model"]["method"]
    if method == "closed" and params.H < 0.5:
        raise UsageError("the closed form needs H >= 1/2; use --method spectral or auto")
    model = FouModel(method=method)
    fact = factorize(model, model.params_as_vector(params), args.n, alpha)
    if fact.jitter:
        print(f"note: diagonal jitter {fact.jitter:g} * rho(0) was needed", file=sys.stderr)
    X = sample_matrix(fact, SeedPlan(int(cfg["seed"]), ()), range(args.m))
    t = alpha * np.arange(args.n + 1)
    if args.layout == "files":
        out_dir = Path(args.out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, x in enumerate(X):
            path = out_dir / f"path_{i:04d}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "x"])
                w.writerows(zip((f"{v:.10g}" for v in t), (repr(float(v)) for v in x)))
        print(f"wrote {args.m} files to {out_dir}", file=sys.stderr)
        return EXIT_OK
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"path_{i}" for i in range(args.m))])
        for k in range(args.n + 1):
            w.writerow([f"{t[k]:.10g}", *(repr(float(v)) for v in X[:, k])])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def read_series(path: Path, column: str | None) -> np.ndarray:
    """Read one numeric column from a text or CSV file.

    Without ``column`` the file must hold one number per line (a header line
    is skipped).  ``column`` is a header name or a 0-based index.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(line for line in text.splitlines() if line.strip()))
    if not rows:
        raise DataError(f"{path} is empty")
    header = None
    try:
        [float(x) for x in rows[0]]
    except ValueError:
        header, rows = rows[0], rows[1:]
    if column is None:
        if any(len(r) != 1 for r in rows):
            raise DataError(f"{path}: expected one value per line; use --column for CSV input")
        idx = 0
    elif column.isdigit():
        idx = int(column)
    else:
        if header is None or column not in header:
            raise DataError(f"{path}: no column named {column!r}")
        idx = header.index(column)
    try:
        values = np.array([float(r[idx]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed numeric data ({exc})") from exc
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite values")
    return values


def cmd_estimate(args) -> int:
    cfg = _apply_overrides(cfgmod.load_config(args.config), args)
    if args.alpha is None and args.config is None:
        raise UsageError("--alpha is required (it is never inferred from the data)")
    alpha = _alpha(cfg)
    box = _box(cfg)
    fixed = dict(cfg["estimation"].get("fixed") or {})
    fixed.update(_parse_fix(args.fix))
    model = FouModel(fixed=fixed, method=cfg["model"]["method"])
    orders = cfg["filters"]["orders"]
    try:
        bank = build_bank(orders, cfg["filters"]["kind"], p=model.param_dim)
    except RankDeficient as exc:
        raise UsageError(f"filter bank unusable: {exc}") from exc
    values = read_series(args.input, args.column)
    if values.size < bank.span + 2:
        raise DataError(f"need at least {bank.span + 2} observations, got {values.size}")
    _print_warnings(cfg, box, alpha)
    spec = MomentSpec(bank, model, alpha)
    weighting = args.weighting or cfg["estimation"]["weighting"]
    if weighting == "identity":
        w = Identity()
    elif weighting == "two-step":
        w = TwoStep()
    else:
        ref = _params(cfg)
        w = OracleEfficient(ref) if weighting == "oracle" else auto_weighting(spec, ref)
    fit = estimate(spec, Trajectory(values, alpha), w, box, cfgmod.optimizer_from(cfg))
    print(fit.summary())
    if fit.omega_ref:
        print(f"  weighting reference: {fit.omega_ref}")
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["parameter", "estimate", "std_error"])
            for name, v, s in zip(fit.param_names, fit.theta_vector, fit.std_errors()):
                wr.writerow([name, repr(float(v)), repr(float(s))])
    if fit.boundary:
        print("error: estimate lies on the box boundary", file=sys.stderr)
        return EXIT_BOUNDARY
    return EXIT_OK


def cmd_omega(args) -> int:
    cfg = _apply_overrides(cfgmod.load_config(args.config), args)
    params = _params(cfg)
    alpha = _alpha(cfg)
    model = FouModel(method=cfg["model"]["method"])
    bank = build_bank(cfg["filters"]["orders"], cfg["filters"]["kind"], p=1)
    spec = MomentSpec(bank, model, alpha)
    res = omega(spec, params, K_max=args.kmax, tol=args.tol, full_output=True)
    np.set_printoptions(precision=10, suppress=False, linewidth=120)
    print(f"Omega for orders {list(bank.orders)} at H={params.H:g}, lambda={params.lam:g}, "
          f"sigma={params.sigma:g}, alpha={alpha:g}")
    print(res.matrix)
    print(f"lag window K={res.K}, relative change over last doubling {res.error_estimate:.2e}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _apply_overrides(cfgmod.load_config(args.config), args)
    if args.m is not None:
        cfg["montecarlo"]["m"] = args.m
    scenarios = cfgmod.scenarios_from(cfg, full=args.full)
    for s in scenarios:
        for w in check_identifiability(s.box, s.alpha):
            print(f"warning: {w}", file=sys.stderr)
    out_dir = Path(args.out_dir or cfg["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(s, cell):
        print(f"{s.scenario_id} L={cell.L}: mse={cell.mse:.4g} e_var={cell.e_var:.4g} "
              f"bias_sq={cell.bias_sq:.4g} failures={cell.failures} ({cell.wall_clock:.1f}s)",
              file=sys.stderr)

    reports = [run_scenario(s, workers=int(cfg["threads"]), progress=progress) for s in scenarios]
    tables = run_table(reports)
    (out_dir / "table.md").write_text(tables.markdown)
    (out_dir / "table.csv").write_text(tables.csv)
    for i, rep in enumerate(reports):
        for L in rep.cells:
            (out_dir / f"estimates_s{i:02d}_L{L}.csv").write_text(rep.estimates_table(L))
    print(tables.markdown)
    if not args.check:
        return EXIT_OK
    rows = [r for rep in reports for r in rep.rows()]
    failed = 0
    for chk in cfgmod.checks_from(cfg):
        match = [r for r in rows if chk.matches(r)]
        if not match:
            print(f"CHECK MISSING H={chk.H} lambda={chk.lam} sigma={chk.sigma} L={chk.L}")
            failed += 1
            continue
        val = match[0][chk.metric]
        ok = chk.passes(val)
        failed += not ok
        print(f"CHECK {'PASS' if ok else 'FAIL'} H={chk.H} lambda={chk.lam} sigma={chk.sigma} L={chk.L} "
              f"{chk.metric}={val:.4g} target={chk.target:g} rtol={chk.rtol:g}")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_diagnose_rate(args) -> int:
    cfg = _apply_overrides(cfgmod.load_config(args.config), args)
    params = _params(cfg)
    alpha = _alpha(cfg)
    if params.H < 0.75:
        raise UsageError("diagnose-rate needs H >= 3/4")
    rep = rate_diagnostic(params, alpha, args.n_grid, m=args.m, seed=int(cfg["seed"]))
    print(rep.table())
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _apply_overrides(cfgmod.load_config(args.config), args)
    alpha = _alpha(cfg)
    box = _box(cfg)
    fixed = dict(cfg["estimation"].get("fixed") or {})
    fixed.update(_parse_fix(getattr(args, "fix", None)))
    p = 3 - len(fixed)
    failed = False
    print(f"config: alpha={alpha:g}, box H={box.lo.H:g}..{box.hi.H:g}, "
          f"lambda={box.lo.lam:g}..{box.hi.lam:g}, sigma={box.lo.sigma:g}..{box.hi.sigma:g}")
    warns = check_identifiability(box, alpha)
    print("[WARN]" if warns else "[PASS]", "identifiability (alpha < 1, lambda < exp(digamma(3)), sigma > 0)")
    for w in warns:
        print(f"       {w}")
    orders = cfg["filters"]["orders"]
    try:
        bank = build_bank(orders, cfg["filters"]["kind"], p=p)
        print(f"[PASS] rank(B) = {bank.rank()} >= {p} free parameters, <= {bank.n_filters} filters")
    except RankDeficient as exc:
        print(f"[FAIL] moment matrix rank: {exc}")
        failed = True
    bad = order_condition_violations(orders, box.hi.H)
    if bad:
        print(f"[WARN] filter orders {bad}: an order-0 pair has a normal limit only for H < 3/4; "
              f"box allows H up to {box.hi.H:g}")
    else:
        print("[PASS] filter-order condition 2(l + l') > 4H - 3 over the box")
    try:
        gap = check_tail_switch(box)
        print(f"[PASS] tail expansion matches exact covariance at the switch (gap {gap:.1e})")
    except FouGmmError as exc:
        print(f"[FAIL] tail switch: {exc}")
        failed = True
    return EXIT_CHECK if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fougmm",
        description="GMM estimation, simulation and Monte Carlo tools for the fractional "
                    "Ornstein-Uhlenbeck process.",
        epilog="exit codes: 0 ok, 2 usage, 3 data/parse, 4 numerical, 5 check failed, 6 boundary estimate",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("simulate", help="simulate fOU paths by Cholesky factorization")
    _add_config(p)
    _add_params(p)
    p.add_argument("--n", type=int, default=1000, help="number of steps N (path has N+1 points)")
    p.add_argument("--m", type=int, default=1, help="number of paths")
    p.add_argument("--seed", type=int, help="base seed (path i uses stream i)")
    p.add_argument("--method", choices=["auto", "closed", "spectral"],
                   help="covariance evaluator (default auto)")
    p.add_argument("--layout", choices=["columns", "files"], default="columns",
                   help="one CSV with a column per path, or one file per path")
    p.add_argument("--out", help="output file (columns) or directory (files); default stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate (H, lambda, sigma) from one observed path")
    p.add_argument("input", type=Path, help="text file (one value per line) or CSV")
    p.add_argument("--column", help="CSV column name or 0-based index")
    _add_config(p)
    _add_params(p)
    _add_box(p)
    _add_filters(p)
    p.add_argument("--weighting", choices=["two-step", "identity", "oracle", "auto"],
                   help="weighting matrix; oracle/auto use the model parameters as reference")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE",
                   help="hold a parameter fixed, e.g. --fix lambda=1 (repeatable)")
    p.add_argument("--csv-out", type=Path, help="write estimates and standard errors as CSV")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("omega", help="long-run covariance matrix of the moment vector")
    _add_config(p)
    _add_params(p)
    _add_filters(p)
    p.add_argument("--kmax", type=int, default=20000, help="largest lag in the sum")
    p.add_argument("--tol", type=float, default=1e-10, help="relative truncation tolerance")
    p.set_defaults(func=cmd_omega)

    p = sub.add_parser("montecarlo", help="run a scenario grid and write tables")
    p.add_argument("--config", type=Path, required=True, help="YAML config with a montecarlo section")
    p.add_argument("--m", type=int, help="replications per cell (overrides config)")
    p.add_argument("--full", action="store_true", help="use the full replication count (full_m)")
    p.add_argument("--threads", type=int, help="worker processes per cell")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--out-dir", help="output directory for tables and estimates")
    p.add_argument("--check", action="store_true", help="compare cells against configured targets")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("diagnose-rate", help="variance scaling of the order-0 moment for H >= 3/4")
    _add_config(p)
    _add_params(p)
    p.add_argument("--n-grid", type=int, nargs="+", default=[1000, 2000, 4000], metavar="N",
                   help="sample sizes")
    p.add_argument("--m", type=int, default=200, help="Monte Carlo paths per N (0 to skip)")
    p.add_argument("--seed", type=int, help="base seed")
    p.set_defaults(func=cmd_diagnose_rate)

    p = sub.add_parser("validate", help="check identifiability, rank and filter-order conditions")
    _add_config(p)
    p.add_argument("--alpha", type=float, help="sampling step (> 0)")
    _add_box(p)
    _add_filters(p)
    p.add_argument("--fix", action="append", metavar="NAME=VALUE", help="parameters held fixed")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonConvergence as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FouGmmError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
