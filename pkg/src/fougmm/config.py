"""YAML configuration for the command-line tool.

A config file is a nested mapping; every key is optional and falls back to
``DEFAULTS``.  See ``configs/example.yaml`` for a complete example.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .covmodel import EstimationBox, FouParams
from .filters import FilterKind
from .gmm import OptimizerConfig
from .montecarlo import Scenario

__all__ = ["DEFAULTS", "ConfigError", "CellCheck", "load_config", "merge", "params_from",
           "box_from", "scenarios_from", "checks_from"]

DEFAULTS = {
    "model": {"H": 0.55, "lambda": 1.0, "sigma": 1.0, "method": "auto"},
    "alpha": 0.1,
    "box": {"H": [0.5, 0.99], "lambda": [0.01, 2.5], "sigma": [0.01, 10.0]},
    "filters": {"kind": "finite-difference", "orders": [1, 2, 3]},
    "estimation": {"weighting": "two-step", "fixed": {}, "n_lhs": 4, "lhs_seed": 20240611,
                   "maxiter": 500},
    "seed": 12345,
    "threads": 1,
    "montecarlo": {
        "N": 1000,
        "m": 200,
        "full_m": 1000,
        "weighting": "auto",
        "L_values": [3, 4, 5, 6, 7],
        "fixed": {},
        "grid": {"H": [0.55], "subscenarios": [{"lambda": 1.0, "sigma": 1.0}]},
        "checks": [],
    },
    "output": {"dir": "results"},
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; values of ``override`` win."""
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return merge(DEFAULTS, raw)


def params_from(cfg: dict) -> FouParams:
    m = cfg["model"]
    return FouParams(float(m["H"]), float(m["lambda"]), float(m["sigma"]))


def box_from(cfg: dict) -> EstimationBox:
    b = cfg["box"]
    try:
        return EstimationBox.from_bounds(H=tuple(b["H"]), lam=tuple(b["lambda"]), sigma=tuple(b["sigma"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"box must give [lo, hi] for H, lambda and sigma: {exc}") from exc


def optimizer_from(cfg: dict) -> OptimizerConfig:
    e = cfg["estimation"]
    return OptimizerConfig(n_lhs=int(e["n_lhs"]), lhs_seed=int(e["lhs_seed"]), maxiter=int(e["maxiter"]))


@dataclass(frozen=True)
class CellCheck:
    """An expected cell value with a relative tolerance, used by ``montecarlo --check``."""

    H: float
    lam: float
    sigma: float
    L: int
    metric: str
    target: float
    rtol: float

    def matches(self, row: dict) -> bool:
        return (abs(row["H"] - self.H) < 1e-12 and abs(row["lambda"] - self.lam) < 1e-12
                and abs(row["sigma"] - self.sigma) < 1e-12 and row["L"] == self.L)

    def passes(self, value: float) -> bool:
        return abs(value - self.target) <= self.rtol * abs(self.target)


def checks_from(cfg: dict) -> list[CellCheck]:
    out = []
    for c in cfg["montecarlo"].get("checks") or []:
        try:
            out.append(CellCheck(float(c["H"]), float(c["lambda"]), float(c["sigma"]), int(c["L"]),
                                 str(c.get("metric", "mse")), float(c["target"]), float(c.get("rtol", 0.3))))
        except KeyError as exc:
            raise ConfigError(f"check entry {c!r} is missing {exc}") from exc
    return out


def scenarios_from(cfg: dict, full: bool = False) -> list[Scenario]:
    mc = cfg["montecarlo"]
    grid = mc["grid"]
    box = box_from(cfg)
    m = int(mc["full_m"] if full else mc["m"])
    out = []
    for H in grid["H"]:
        for sub in grid["subscenarios"]:
            lam, sig = float(sub["lambda"]), float(sub["sigma"])
            fixed = {k: (lam if k == "lambda" else sig if k == "sigma" else float(H))
                     for k in (mc.get("fixed") or {})}
            out.append(Scenario(
                params_true=FouParams(float(H), lam, sig),
                alpha=float(cfg["alpha"]),
                N=int(mc["N"]),
                m=m,
                L_values=tuple(mc["L_values"]),
                filter_kind=FilterKind(cfg["filters"]["kind"]),
                weighting=str(mc["weighting"]),
                fixed=fixed,
                box=box,
                base_seed=int(cfg["seed"]),
                optimizer=optimizer_from(cfg),
            ))
    return out
