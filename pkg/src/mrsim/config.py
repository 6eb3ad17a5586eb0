"""Run configuration: load, validate, and wire a complete simulation.

A run config names the cluster topology, workload spec, and failure plan
files, picks a scheduler (with its queue or wrapper settings), and fixes the
seed and horizon. Everything is validated before the first event fires and
every run builds fresh state, so repeated runs with one config are fully
independent and reproducible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

from . import models
from .atlas import AtlasConfig, AtlasScheduler
from .cluster import build_cluster
from .engine import Engine, RunResult, rng_streams
from .failures import parse_plan
from .report import build_report, scenario_digest
from .schedulers import (CapacityConfig, CapacityScheduler, FairConfig,
                         FairScheduler, FifoScheduler, SpeculationConfig)
from .workload import generate_workload

SCHEDULER_NAMES = ("fifo", "fair", "capacity", "atlas")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def _load_structured(path: str, what: str):
    import yaml

    if not os.path.exists(path):
        raise ConfigError(f"{what}: file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            if path.endswith(".json"):
                return json.load(fh)
            return yaml.safe_load(fh)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{what}: cannot parse {path}: {exc}") from exc


@dataclass
class RunConfig:
    cluster_path: str
    workload_path: str
    scheduler: str
    seed: int
    horizon_ms: int
    failure_plan_path: Optional[str] = None
    fair: dict = field(default_factory=dict)
    capacity: Optional[dict] = None
    atlas: dict = field(default_factory=dict)
    speculation: dict = field(default_factory=dict)
    base_dir: str = "."

    # parsed file contents, filled by validate()
    cluster_cfg: dict = field(default_factory=dict)
    workload_cfg: dict = field(default_factory=dict)
    plan_cfg: Optional[dict] = None

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def validate(self) -> None:
        if self.scheduler not in SCHEDULER_NAMES:
            raise ConfigError(f"scheduler: unknown name {self.scheduler!r} "
                              f"(expected one of {SCHEDULER_NAMES})")
        if self.seed is None:
            raise ConfigError("seed: required (runs must be reproducible)")
        if self.horizon_ms <= 0:
            raise ConfigError(f"horizon_ms: must be > 0, got {self.horizon_ms}")
        self.cluster_cfg = _load_structured(self.resolve(self.cluster_path), "cluster")
        self.workload_cfg = _load_structured(self.resolve(self.workload_path), "workload")
        if self.failure_plan_path:
            self.plan_cfg = _load_structured(self.resolve(self.failure_plan_path),
                                             "failure_plan")
        if self.scheduler == "atlas":
            base = self.atlas.get("base", "fifo")
            if base not in ("fifo", "fair", "capacity"):
                raise ConfigError(f"atlas.base: unknown base scheduler {base!r}")
            for key in ("map_model", "reduce_model"):
                path = self.atlas.get(key)
                if path and not os.path.exists(self.resolve(path)):
                    raise ConfigError(f"atlas.{key}: file not found: {self.resolve(path)}")

    def digest(self) -> str:
        return scenario_digest(self.cluster_cfg, self.workload_cfg,
                               self.plan_cfg, self.horizon_ms)


def load_run_config(path: str, overrides: Optional[dict] = None) -> RunConfig:
    raw = _load_structured(path, "run config")
    if not isinstance(raw, dict):
        raise ConfigError(f"run config: {path} must be a mapping")
    raw = dict(raw)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in ("cluster", "workload"):
        if not raw.get(key):
            raise ConfigError(f"{key}: required field missing in {path}")
    if raw.get("seed") is None:
        raise ConfigError(f"seed: required field missing in {path}")
    if raw.get("horizon_ms") is None:
        raise ConfigError(f"horizon_ms: required field missing in {path}")
    cfg = RunConfig(
        cluster_path=str(raw["cluster"]),
        workload_path=str(raw["workload"]),
        failure_plan_path=raw.get("failure_plan"),
        scheduler=str(raw.get("scheduler", "fifo")).lower(),
        seed=int(raw["seed"]),
        horizon_ms=int(raw["horizon_ms"]),
        fair=raw.get("fair") or {},
        capacity=raw.get("capacity"),
        atlas=raw.get("atlas") or {},
        speculation=raw.get("speculation") or {},
        base_dir=os.path.dirname(os.path.abspath(path)),
    )
    cfg.validate()
    return cfg


def make_scheduler(cfg: RunConfig, name: Optional[str] = None):
    name = (name or cfg.scheduler).lower()
    speculation = SpeculationConfig(
        enabled=bool(cfg.speculation.get("enabled", False)),
        gap_threshold=float(cfg.speculation.get("gap_threshold", 0.5)),
    )
    if name == "fifo":
        return FifoScheduler(speculation)
    if name == "fair":
        fair = FairConfig(
            default_weight=float(cfg.fair.get("default_weight", 1.0)),
            default_min_share=int(cfg.fair.get("default_min_share", 0)),
            per_job=cfg.fair.get("per_job") or {},
        )
        return FairScheduler(fair, speculation)
    if name == "capacity":
        if not cfg.capacity:
            cap = CapacityConfig(queues={"default": 1.0})
        else:
            cap = CapacityConfig(
                queues={str(k): float(v) for k, v in (cfg.capacity.get("queues") or {}).items()},
                mapping=cfg.capacity.get("mapping") or {},
                default_queue=str(cfg.capacity.get("default_queue", "default")),
            )
        return CapacityScheduler(cap, speculation)
    if name == "atlas":
        base = make_scheduler(cfg, cfg.atlas.get("base", "fifo"))
        map_model = _load_model_or_constant(cfg, "map_model")
        reduce_model = _load_model_or_constant(cfg, "reduce_model")
        atlas_cfg = AtlasConfig(
            speculative_fanout=int(cfg.atlas.get("speculative_fanout", 2)),
            penalty_increment=int(cfg.atlas.get("penalty_increment", 1)),
        )
        return AtlasScheduler(base, map_model, reduce_model, atlas_cfg)
    raise ConfigError(f"scheduler: unknown name {name!r}")


def _load_model_or_constant(cfg: RunConfig, key: str):
    path = cfg.atlas.get(key)
    if path:
        return models.load_model(cfg.resolve(path))
    # no model configured: predict success always (pure pass-through wrapper)
    return models.constant_model(p_fail=0.0)


def build_engine(cfg: RunConfig, seed: Optional[int] = None,
                 scheduler_name: Optional[str] = None,
                 collect_trace: bool = True,
                 collect_decisions: bool = False) -> Engine:
    """Assemble a fresh engine: new cluster, new workload, new RNG streams."""
    run_seed = cfg.seed if seed is None else seed
    streams = rng_streams(run_seed)
    cluster = build_cluster(cfg.cluster_cfg)
    chains = generate_workload(cfg.workload_cfg, streams["workload"])
    plan = parse_plan(cfg.plan_cfg)
    scheduler = make_scheduler(cfg, scheduler_name)
    echo = {
        "scenario_digest": cfg.digest(),
        "cluster": cfg.cluster_path,
        "workload": cfg.workload_path,
        "failure_plan": cfg.failure_plan_path,
        "scheduler": scheduler_name or cfg.scheduler,
    }
    return Engine(cluster, chains, plan, scheduler, run_seed, cfg.horizon_ms,
                  config_echo=echo, streams=streams,
                  collect_trace=collect_trace, collect_decisions=collect_decisions)


def run_simulation(cfg: RunConfig, seed: Optional[int] = None,
                   scheduler_name: Optional[str] = None,
                   collect_trace: bool = True,
                   collect_decisions: bool = False) -> tuple[RunResult, dict]:
    engine = build_engine(cfg, seed, scheduler_name, collect_trace, collect_decisions)
    result = engine.run()
    return result, build_report(result)


def run_matrix(cfg: RunConfig, schedulers: list[str], seeds: list[int],
               workers: int = 1) -> list[dict]:
    """Run every (scheduler, seed) pair and return reports in a fixed order.

    Runs are independent (each owns its engine); with workers > 1 they fan
    out over processes and are merged back in the same deterministic order.
    """
    combos = [(s, seed) for s in schedulers for seed in seeds]
    if workers <= 1:
        return [run_simulation(cfg, seed=seed, scheduler_name=s,
                               collect_trace=False)[1] for s, seed in combos]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_matrix_worker, cfg, s, seed) for s, seed in combos]
        return [f.result() for f in futures]


def _matrix_worker(cfg: RunConfig, scheduler_name: str, seed: int) -> dict:
    return run_simulation(cfg, seed=seed, scheduler_name=scheduler_name,
                          collect_trace=False)[1]
