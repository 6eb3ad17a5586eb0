"""Cluster model: nodes, racks, slots, and the heartbeat protocol settings.

Every node plays both the worker (task slots) and the storage (block
replicas) role. Liveness has two layers:

* ground truth ``state`` (ALIVE / DEAD / SLOW), mutated by failure injection;
* the controller's belief ``lost``, which only flips when the heartbeat
  expiry rule fires. Baseline schedulers see the belief; between a death and
  its detection they can therefore route work into a black hole.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class NodeState(str, Enum):
    ALIVE = "ALIVE"
    DEAD = "DEAD"
    SLOW = "SLOW"


@dataclass
class HeartbeatConfig:
    """Worker-to-controller heartbeat cadence with an adaptive interval.

    The interval halves (down to ``min_interval_ms``) whenever more than
    ``failure_fraction_threshold`` of the workers failed within one cycle,
    and otherwise grows by ``increase_factor`` back up to the base value.
    """

    base_interval_ms: int = 600_000
    min_interval_ms: int = 120_000
    current_interval_ms: int = 0
    failure_fraction_threshold: float = 1.0 / 3.0
    increase_factor: float = 1.5

    def __post_init__(self) -> None:
        if self.current_interval_ms == 0:
            self.current_interval_ms = self.base_interval_ms
        if not (0 < self.min_interval_ms <= self.base_interval_ms):
            raise ValueError("heartbeat intervals must satisfy 0 < min <= base")
        if not (self.min_interval_ms <= self.current_interval_ms <= self.base_interval_ms):
            raise ValueError("current heartbeat interval out of [min, base]")

    def adapt(self, failed_fraction: float) -> int:
        """Update and return the interval given last cycle's failed fraction."""
        if failed_fraction > self.failure_fraction_threshold:
            self.current_interval_ms = max(self.min_interval_ms, self.current_interval_ms // 2)
        else:
            grown = int(self.current_interval_ms * self.increase_factor)
            self.current_interval_ms = min(self.base_interval_ms, grown)
        return self.current_interval_ms


@dataclass
class Node:
    """One worker/storage node."""

    node_id: str
    rack_id: str
    map_slots: int = 2
    reduce_slots: int = 1
    cpu_capacity: float = 4.0
    mem_capacity: float = 8192.0
    hdfs_rw_capacity: float = 10.0
    state: NodeState = NodeState.ALIVE
    slowdown: float = 1.0
    last_heartbeat: int = 0
    lost: bool = False
    death_at: Optional[int] = None
    hosted_blocks: set = field(default_factory=set)
    #: Attempts currently occupying slots, in start order. Keys whose node
    #: died keep occupying slots until failure processing clears them.
    running_map: list = field(default_factory=list)
    running_reduce: list = field(default_factory=list)
    #: Historical attempt outcomes observed on this node.
    tt_finished: int = 0
    tt_failed: int = 0

    def running(self, task_type=None) -> list:
        if task_type is None:
            return self.running_map + self.running_reduce
        return self.running_map if task_type.value == "MAP" else self.running_reduce

    def free_slots(self, task_type) -> int:
        if task_type.value == "MAP":
            return self.map_slots - len(self.running_map)
        return self.reduce_slots - len(self.running_reduce)

    def used_cpu(self, demand_of) -> float:
        return sum(demand_of(a).cpu for a in self.running())

    def used_mem(self, demand_of) -> float:
        return sum(demand_of(a).mem_mb for a in self.running())


@dataclass
class Cluster:
    """Node inventory plus the run-wide protocol knobs."""

    nodes: dict[str, Node]
    heartbeat: HeartbeatConfig = field(default_factory=HeartbeatConfig)
    attempt_timeout_ms: int = 600_000
    max_map_attempts: int = 4
    max_reduce_attempts: int = 4
    #: A node is declared lost when no heartbeat arrived for longer than
    #: expiry_multiple * current heartbeat interval.
    expiry_multiple: float = 2.0
    partitioned_racks: set = field(default_factory=set)

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("cluster must have at least one node")

    @property
    def node_ids(self) -> list[str]:
        return list(self.nodes)

    def racks(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for node in self.nodes.values():
            out.setdefault(node.rack_id, []).append(node.node_id)
        return out

    def expiry_ms(self) -> int:
        return int(self.expiry_multiple * self.heartbeat.current_interval_ms)

    def reachable(self, node_id: str) -> bool:
        """Ground-truth reachability: not dead and not cut off by a partition."""
        node = self.nodes[node_id]
        return node.state is not NodeState.DEAD and node.rack_id not in self.partitioned_racks

    def believed_alive(self, node_id: str) -> bool:
        """Controller belief: everything not declared lost looks fine."""
        return not self.nodes[node_id].lost

    def max_attempts(self, task_type) -> int:
        return self.max_map_attempts if task_type.value == "MAP" else self.max_reduce_attempts

    def total_slots(self) -> int:
        return sum(n.map_slots + n.reduce_slots for n in self.nodes.values())


class ClusterConfigError(ValueError):
    """Malformed cluster topology file."""


def build_cluster(cfg: dict) -> Cluster:
    """Build a Cluster from a parsed topology mapping.

    Either an explicit ``nodes:`` list or a ``grid:`` shorthand
    (``racks`` x ``nodes_per_rack`` homogeneous nodes) must be present.
    """
    if not isinstance(cfg, dict):
        raise ClusterConfigError("cluster topology must be a mapping")
    defaults = cfg.get("node_defaults") or {}
    nodes: dict[str, Node] = {}

    def mk(node_id: str, rack_id: str, over: dict) -> Node:
        params = {
            "map_slots": 2, "reduce_slots": 1, "cpu": 4.0,
            "mem_mb": 8192.0, "hdfs_rw": 10.0,
        }
        params.update({k: v for k, v in defaults.items() if k in params})
        params.update({k: v for k, v in over.items() if k in params})
        return Node(
            node_id=node_id,
            rack_id=rack_id,
            map_slots=int(params["map_slots"]),
            reduce_slots=int(params["reduce_slots"]),
            cpu_capacity=float(params["cpu"]),
            mem_capacity=float(params["mem_mb"]),
            hdfs_rw_capacity=float(params["hdfs_rw"]),
        )

    if "nodes" in cfg:
        for ndef in cfg["nodes"]:
            node_id = str(ndef.get("id") or ndef.get("node_id") or "")
            if not node_id:
                raise ClusterConfigError("every node needs an 'id'")
            if node_id in nodes:
                raise ClusterConfigError(f"duplicate node id {node_id!r}")
            nodes[node_id] = mk(node_id, str(ndef.get("rack", "r0")), ndef)
    elif "grid" in cfg:
        grid = cfg["grid"]
        racks = int(grid.get("racks", 1))
        per = int(grid.get("nodes_per_rack", 1))
        if racks < 1 or per < 1:
            raise ClusterConfigError("grid racks and nodes_per_rack must be >= 1")
        idx = 0
        for r in range(racks):
            for _ in range(per):
                node_id = f"n{idx:03d}"
                nodes[node_id] = mk(node_id, f"r{r}", grid)
                idx += 1
    else:
        raise ClusterConfigError("cluster topology needs a 'nodes' list or a 'grid' block")

    hb_cfg = cfg.get("heartbeat") or {}
    heartbeat = HeartbeatConfig(
        base_interval_ms=int(hb_cfg.get("base_interval_ms", 600_000)),
        min_interval_ms=int(hb_cfg.get("min_interval_ms", 120_000)),
        failure_fraction_threshold=float(hb_cfg.get("failure_fraction_threshold", 1.0 / 3.0)),
        increase_factor=float(hb_cfg.get("increase_factor", 1.5)),
    )
    return Cluster(
        nodes=nodes,
        heartbeat=heartbeat,
        attempt_timeout_ms=int(cfg.get("attempt_timeout_ms", 600_000)),
        max_map_attempts=int(cfg.get("max_map_attempts", 4)),
        max_reduce_attempts=int(cfg.get("max_reduce_attempts", 4)),
        expiry_multiple=float(cfg.get("expiry_multiple", 2.0)),
    )


def load_cluster(path: str) -> Cluster:
    import yaml

    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh) if path.endswith(".json") else yaml.safe_load(fh)
    return build_cluster(cfg)
