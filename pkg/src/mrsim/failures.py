"""Failure injection: declarative scenarios of node kills, slowdowns,
partitions, and stochastic per-attempt failures.

A plan mixes explicit timed entries with stochastic processes; compilation
expands the processes into concrete entries up to the simulation horizon,
deterministically for the seed. The per-attempt Bernoulli failure draw is
node-correlated: slow nodes and crowded nodes fail more often.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ENTRY_KINDS = ("NODE_KILL", "NODE_SLOW", "NODE_RECOVER", "TASK_KILL", "NETWORK_PARTITION")


class FailurePlanError(ValueError):
    """Malformed failure plan file."""


@dataclass(frozen=True)
class FailureEntry:
    """One concrete injection: what happens, when, to which target."""

    at: int
    kind: str
    node: Optional[str] = None
    rack: Optional[str] = None
    task: Optional[str] = None
    duration_ms: Optional[int] = None

    def to_record(self) -> dict:
        rec = {"at": self.at, "kind": self.kind}
        for key in ("node", "rack", "task", "duration_ms"):
            val = getattr(self, key)
            if val is not None:
                rec[key] = val
        return rec


@dataclass
class FailurePlan:
    """Parsed plan: explicit entries plus stochastic process parameters."""

    entries: list[FailureEntry] = field(default_factory=list)
    node_mtbf_ms: Optional[float] = None
    node_mttr_ms: Optional[float] = None
    attempt_fail_prob: float = 0.0
    slow_node_prob: float = 0.0
    slowdown_factor: float = 3.0
    #: Failure-rate multiplier for attempts on SLOW nodes.
    slow_fail_multiplier: float = 2.0
    #: Contention coefficient: p scales by 1 + c * max(0, running - slots/2).
    concurrency_coeff: float = 0.1

    def __post_init__(self) -> None:
        for name in ("attempt_fail_prob", "slow_node_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise FailurePlanError(f"{name} must be in [0, 1], got {p}")
        for name in ("node_mtbf_ms", "node_mttr_ms"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise FailurePlanError(f"{name} must be > 0 when present")


def parse_plan(cfg: Optional[dict]) -> FailurePlan:
    """Validate and normalize a parsed plan mapping (None means no failures)."""
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise FailurePlanError("failure plan must be a mapping")
    entries = []
    for i, edef in enumerate(cfg.get("entries") or []):
        kind = str(edef.get("kind", "")).upper()
        if kind not in ENTRY_KINDS:
            raise FailurePlanError(f"entries[{i}]: unknown kind {kind!r}")
        if "at_ms" not in edef and "at" not in edef:
            raise FailurePlanError(f"entries[{i}]: missing 'at_ms'")
        entries.append(FailureEntry(
            at=int(edef.get("at_ms", edef.get("at", 0))),
            kind=kind,
            node=edef.get("node"),
            rack=edef.get("rack"),
            task=edef.get("task"),
            duration_ms=int(edef["duration_ms"]) if "duration_ms" in edef else None,
        ))
    return FailurePlan(
        entries=entries,
        node_mtbf_ms=float(cfg["node_mtbf_ms"]) if cfg.get("node_mtbf_ms") else None,
        node_mttr_ms=float(cfg["node_mttr_ms"]) if cfg.get("node_mttr_ms") else None,
        attempt_fail_prob=float(cfg.get("attempt_fail_prob", 0.0)),
        slow_node_prob=float(cfg.get("slow_node_prob", 0.0)),
        slowdown_factor=float(cfg.get("slowdown_factor", 3.0)),
        slow_fail_multiplier=float(cfg.get("slow_fail_multiplier", 2.0)),
        concurrency_coeff=float(cfg.get("concurrency_coeff", 0.1)),
    )


def load_plan(path: str) -> FailurePlan:
    import yaml

    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh) if path.endswith(".json") else yaml.safe_load(fh)
    return parse_plan(cfg)


def compile_plan(plan: FailurePlan, node_ids: list[str], horizon_ms: int,
                 rng: np.random.Generator) -> list[FailureEntry]:
    """Expand stochastic processes into concrete entries up to the horizon.

    Explicit entries are kept as-is. The kill process draws, per node in id
    order, Poisson kill times at rate 1/mtbf over [0, horizon); each kill is
    optionally followed by a recovery after an Exp(mttr) repair. Slow-node
    selection flags each node SLOW at t=0 with probability slow_node_prob.
    Output is sorted by (at, insertion order).
    """
    entries = list(plan.entries)
    ordered = sorted(node_ids)
    if plan.slow_node_prob > 0:
        for node_id in ordered:
            if rng.random() < plan.slow_node_prob:
                entries.append(FailureEntry(at=0, kind="NODE_SLOW", node=node_id))
    if plan.node_mtbf_ms:
        for node_id in ordered:
            t = 0.0
            while True:
                t += rng.exponential(plan.node_mtbf_ms)
                if t >= horizon_ms:
                    break
                kill_at = int(t)
                entries.append(FailureEntry(at=kill_at, kind="NODE_KILL", node=node_id))
                if plan.node_mttr_ms:
                    repair = int(t + max(1.0, rng.exponential(plan.node_mttr_ms)))
                    if repair < horizon_ms:
                        entries.append(FailureEntry(at=repair, kind="NODE_RECOVER", node=node_id))
    entries.sort(key=lambda e: e.at)
    return entries


def effective_fail_prob(plan: FailurePlan, node, running_on_node: int) -> float:
    """Per-attempt failure probability on ``node`` given its current load."""
    p = plan.attempt_fail_prob
    if p <= 0.0:
        return 0.0
    if node.state.value == "SLOW":
        p *= plan.slow_fail_multiplier
    slots = node.map_slots + node.reduce_slots
    over = max(0, running_on_node - slots // 2)
    p *= 1.0 + plan.concurrency_coeff * over
    return min(1.0, p)


def attempt_outcome(plan: FailurePlan, node, running_on_node: int,
                    rng: np.random.Generator) -> bool:
    """Draw one attempt outcome; True means the attempt will finish."""
    p = effective_fail_prob(plan, node, running_on_node)
    if p <= 0.0:
        return True
    if p >= 1.0:
        return False
    return rng.random() >= p
