"""Configuration-driven experiment runner with reproducible outputs.

An experiment is one TOML document: problem, noise, optimizer, schedule and
run sections (see README for the schema).  All ids are resolved before any
computation starts; re-running a config overwrites its outputs with
byte-identical files, and per-run randomness is derived as
hash64(master_seed, seed_index) with disjoint substreams for the starting
point and the noise.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

from . import __version__
from .analysis import loglog_slope_positive
from .errors import ParameterError, ValidationError
from .optimizers import (MomentumRule, Trace, derive_run_seed,
                         run_anytime_o2b_ftrl, run_delayed_adagrad_momentum,
                         run_ftrl_sgdm, run_sgd, run_sgdm)
from .problems import NoiseModel, Problem, make_problem, problem_ids
from .schedules import SCHEDULE_KINDS, schedule_from_config

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "SeedResult",
    "load_config",
    "config_hash",
    "run_experiment",
    "sweep",
    "OUTPUT_ROOT_ENV",
]

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "SGDLAB_OUT_ROOT"

OPTIMIZER_KINDS = ("sgd", "sgdm", "adagrad-momentum", "ftrl-sgdm", "o2b-ftrl")
NOISE_KINDS = ("none", "subgaussian", "bounded", "affine", "interpolation")
MOMENTUM_KINDS = ("none", "classic-hb", "current-hb", "ema")


def config_hash(raw: dict) -> str:
    """Order-insensitive hash of the raw config document."""
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ExperimentConfig:
    """Validated experiment description plus the raw document it came from."""

    raw: dict
    problem_id: str
    problem_params: dict
    noise: dict
    optimizer: dict
    schedule: dict
    T: int
    seeds: List[int]
    master_seed: int
    thin: int
    out_dir: str
    save_final: bool
    metrics: List[str]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        def need(section, key, typ=None):
            if section not in raw:
                raise ValidationError(f"missing [{section}] section")
            if key not in raw[section]:
                raise ValidationError(f"missing {section}.{key}")
            val = raw[section][key]
            if typ is not None and not isinstance(val, typ):
                raise ValidationError(f"{section}.{key} has wrong type")
            return val

        schema = raw.get("schema_version")
        if schema != SCHEMA_VERSION:
            raise ValidationError(
                f"schema_version must be {SCHEMA_VERSION}, got {schema!r}")

        problem_id = need("problem", "id", str)
        if problem_id not in problem_ids():
            raise ValidationError(
                f"problem.id: unknown problem {problem_id!r}; known: {problem_ids()}")
        problem_params = {k: v for k, v in raw["problem"].items() if k != "id"}

        noise = dict(raw.get("noise", {"kind": "none"}))
        if noise.get("kind") not in NOISE_KINDS:
            raise ValidationError(
                f"noise.kind: unknown kind {noise.get('kind')!r}; known: {NOISE_KINDS}")

        optimizer = dict(raw.get("optimizer", {"kind": "sgd"}))
        if optimizer.get("kind") not in OPTIMIZER_KINDS:
            raise ValidationError(
                f"optimizer.kind: unknown kind {optimizer.get('kind')!r}; "
                f"known: {OPTIMIZER_KINDS}")
        mom = optimizer.get("momentum", {"kind": "none"})
        if optimizer["kind"] == "sgdm" and mom.get("kind") not in MOMENTUM_KINDS:
            raise ValidationError(
                f"optimizer.momentum.kind: unknown kind {mom.get('kind')!r}; "
                f"known: {MOMENTUM_KINDS}")

        if optimizer["kind"] == "adagrad-momentum":
            schedule = dict(raw.get("schedule", {}))  # step rule is built in
        else:
            need("schedule", "kind", str)
            schedule = dict(raw["schedule"])
            if optimizer["kind"] in ("ftrl-sgdm", "o2b-ftrl"):
                allowed = tuple(k for k in SCHEDULE_KINDS if k.startswith("ftrl-"))
            else:
                allowed = tuple(k for k in SCHEDULE_KINDS if not k.startswith("ftrl-"))
            if schedule["kind"] not in allowed:
                raise ValidationError(
                    f"schedule.kind: unknown or incompatible kind "
                    f"{schedule['kind']!r}; known for this optimizer: {sorted(allowed)}")

        T = need("run", "T", int)
        if T < 1:
            raise ValidationError("run.T must be >= 1")
        seeds = need("run", "seeds", list)
        if not seeds or not all(isinstance(s, int) for s in seeds):
            raise ValidationError("run.seeds must be a non-empty list of integers")
        out_dir = need("run", "out_dir", str)
        metrics = list(raw["run"].get("metrics", ["f_gap"]))
        known_metrics = ("f_gap", "grad_norm_sq", "min_grad_sq", "eta", "m_norm")
        for m in metrics:
            if m not in known_metrics:
                raise ValidationError(
                    f"run.metrics: unknown metric {m!r}; known: {known_metrics}")
        return cls(
            raw=raw, problem_id=problem_id, problem_params=problem_params,
            noise=noise, optimizer=optimizer, schedule=schedule, T=T,
            seeds=list(seeds), master_seed=int(raw["run"].get("master_seed", 0)),
            thin=int(raw["run"].get("thin", 1)), out_dir=out_dir,
            save_final=bool(raw["run"].get("save_final", False)),
            metrics=metrics,
        )

    def hash(self) -> str:
        return config_hash(self.raw)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {p}")
    with open(p, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"config is not valid TOML: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def _build_noise(cfg: ExperimentConfig, problem: Problem) -> NoiseModel:
    kind = cfg.noise["kind"]
    try:
        if kind == "none":
            return NoiseModel.none()
        if kind == "subgaussian":
            return NoiseModel.additive_subgaussian(cfg.noise["sigma"])
        if kind == "bounded":
            return NoiseModel.bounded_support(cfg.noise["S"])
        if kind == "affine":
            return NoiseModel.affine_variance(cfg.noise.get("a", 0.0),
                                              cfg.noise.get("b", 0.0))
        if kind == "interpolation":
            if problem.components is None:
                raise ValidationError(
                    "noise.kind=interpolation needs a finite-sum problem")
            return NoiseModel.finite_sum_interpolation(problem.components)
    except KeyError as exc:
        raise ValidationError(f"noise.{exc.args[0]} is required for kind {kind!r}") from None
    raise ValidationError(f"noise.kind: unknown kind {kind!r}")


def _momentum_rule(spec: dict) -> MomentumRule:
    kind = spec.get("kind", "none")
    if kind == "none":
        return MomentumRule.none()
    if kind == "classic-hb":
        return MomentumRule.classic_hb(spec.get("mu", 0.0))
    if kind == "current-hb":
        return MomentumRule.current_rate_hb(spec.get("mu", 0.0))
    if kind == "ema":
        return MomentumRule.ema(spec.get("beta", 0.9))
    raise ValidationError(f"optimizer.momentum.kind: unknown kind {kind!r}")


def _run_one(cfg: ExperimentConfig, problem: Problem, seed_index: int) -> Trace:
    noise = _build_noise(cfg, problem)
    seed = derive_run_seed(cfg.master_seed, seed_index)
    kind = cfg.optimizer["kind"]
    if kind == "adagrad-momentum":
        return run_delayed_adagrad_momentum(
            problem, noise, alpha=cfg.optimizer.get("alpha", 1.0),
            beta=cfg.optimizer.get("beta", 1.0), mu=cfg.optimizer.get("mu", 0.0),
            T=cfg.T, seed=seed, thin=cfg.thin)
    try:
        schedule = schedule_from_config(cfg.schedule["kind"],
                                        cfg.schedule.get("params"))
    except ParameterError as exc:
        raise ValidationError(f"schedule: {exc}") from None
    if kind == "sgd":
        return run_sgd(problem, noise, schedule, cfg.T, seed=seed, thin=cfg.thin)
    if kind == "sgdm":
        rule = _momentum_rule(cfg.optimizer.get("momentum", {"kind": "none"}))
        return run_sgdm(problem, noise, schedule, rule, cfg.T, seed=seed,
                        thin=cfg.thin)
    if kind == "ftrl-sgdm":
        return run_ftrl_sgdm(problem, noise, schedule, cfg.T, seed=seed,
                             thin=cfg.thin)
    if kind == "o2b-ftrl":
        return run_anytime_o2b_ftrl(problem, noise, schedule, cfg.T, seed=seed,
                                    thin=cfg.thin)
    raise ValidationError(f"optimizer.kind: unknown kind {kind!r}")


@dataclass
class SeedResult:
    seed_index: int
    seed: int
    status: str
    f_gap_at_T: float
    csv_path: str


@dataclass
class ExperimentResult:
    config_hash: str
    version: str
    out_dir: str
    seed_results: List[SeedResult] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "out_dir": self.out_dir,
            "seeds": [vars(s) for s in self.seed_results],
            "aggregates": self.aggregates,
        }


def _resolve_out_dir(out_dir: str, out_root: Optional[str]) -> Path:
    root = out_root or os.environ.get(OUTPUT_ROOT_ENV)
    p = Path(out_dir)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def run_experiment(config: ExperimentConfig,
                   out_root: Optional[str] = None) -> ExperimentResult:
    """Execute all seeds, writing one CSV per seed plus a summary JSON.

    Deterministic and idempotent: the same config file produces the same
    bytes.  Diverged runs are recorded in the result, not raised.
    """
    try:
        problem = make_problem(config.problem_id, **config.problem_params)
    except (ParameterError, TypeError) as exc:
        raise ValidationError(f"problem: {exc}") from None
    _build_noise(config, problem)  # fail fast before any run starts
    if config.optimizer["kind"] != "adagrad-momentum":
        try:
            schedule_from_config(config.schedule["kind"], config.schedule.get("params"))
        except (ParameterError, TypeError) as exc:
            raise ValidationError(f"schedule: {exc}") from None
    out = _resolve_out_dir(config.out_dir, out_root)
    out.mkdir(parents=True, exist_ok=True)
    result = ExperimentResult(config_hash=config.hash(), version=__version__,
                              out_dir=str(out))
    gaps = []
    slopes = {m: [] for m in config.metrics}
    for i, seed_index in enumerate(config.seeds):
        trace = _run_one(config, problem, seed_index)
        csv_path = out / f"seed_{seed_index:04d}.csv"
        trace.to_csv(csv_path)
        sidecar = trace.sidecar(config=config.raw,
                                include_final_point=config.save_final)
        with open(out / f"seed_{seed_index:04d}.json", "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
        gap = float(trace.f_gap[-1])
        result.seed_results.append(SeedResult(
            seed_index=seed_index, seed=derive_run_seed(config.master_seed, seed_index),
            status=trace.status, f_gap_at_T=gap, csv_path=str(csv_path)))
        if trace.status == "ok":
            gaps.append(gap)
            for m in config.metrics:
                try:
                    slopes[m].append(loglog_slope_positive(trace, m))
                except ParameterError:
                    pass
    result.aggregates = {
        "n_ok": sum(1 for s in result.seed_results if s.status == "ok"),
        "n_diverged": sum(1 for s in result.seed_results if s.status == "diverged"),
        "f_gap_mean": float(np.mean(gaps)) if gaps else math.nan,
        "f_gap_median": float(np.median(gaps)) if gaps else math.nan,
        "slope_median": {
            m: (float(np.median(v)) if v else math.nan) for m, v in slopes.items()
        },
    }
    with open(out / "summary.json", "w") as fh:
        json.dump({"config": config.raw, **result.as_dict()}, fh,
                  sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")
    return result


def _set_path(raw: dict, axis: str, value) -> None:
    keys = axis.split(".")
    node = raw
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise ValidationError(f"axis {axis!r}: no such config path")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ValidationError(f"axis {axis!r}: no such config path")
    node[keys[-1]] = value


def sweep(config: ExperimentConfig, axis: str, values,
          out_root: Optional[str] = None) -> List[ExperimentResult]:
    """Re-run the experiment for each value of one config entry.

    Results come back in the order of ``values``; each variant writes under
    ``<out_dir>/<axis>=<value>``.
    """
    values = list(values)
    if not values:
        raise ValidationError("sweep needs at least one value")
    _set_path(copy.deepcopy(config.raw), axis, values[0])  # fail fast on the path
    results = []
    for v in values:
        raw = copy.deepcopy(config.raw)
        _set_path(raw, axis, v)
        raw["run"]["out_dir"] = str(Path(config.out_dir) / f"{axis}={v}")
        results.append(run_experiment(ExperimentConfig.from_dict(raw), out_root))
    return results
