"""Failure-aware scheduling wrapper around any baseline scheduler.

For every candidate placement proposed by the base policy the wrapper
predicts the attempt outcome from the task's current attributes:

* predicted to succeed: verify that the chosen worker and the task's data
  replicas are actually reachable (the belief the base policy works from can
  lag reality by most of a heartbeat interval). If they are, assign as the
  base policy wanted; if not, keep the task waiting for reactivation, and
  requeue it with a penalty once it has waited a full timeout.
* predicted to fail: launch redundant copies on several nearby healthy
  nodes at once; the first finished copy wins. While fewer than the desired
  number of distinct nodes have a free slot and resource headroom, the task
  waits (bounded by the same timeout, then penalty requeue).

Penalties lower a task's effective priority: tasks are offered to the base
policy in ascending penalty classes, so a penalized task never jumps ahead
of an equally-prioritized clean one.

The wrapper also adapts the heartbeat interval: whenever more than the
configured fraction of workers died within one controller cycle the interval
halves (down to its floor) so that dead workers are detected sooner, and it
grows back while the cluster is calm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .engine import Engine
from .features import extract_features
from .models import PredictiveModel, SUCCEED_PRED
from .schedulers import (Assign, BaseScheduler, Requeue, SpeculativeAssign,
                         WAIT)
from .workload import Task, TaskStatus, TaskType


@dataclass
class AtlasConfig:
    #: Number of redundant copies for a task predicted to fail.
    speculative_fanout: int = 2
    penalty_increment: int = 1


class AtlasScheduler:
    """Wraps a base scheduler; see module docstring for the decision flow."""

    def __init__(self, base: BaseScheduler, map_model: PredictiveModel,
                 reduce_model: PredictiveModel,
                 config: Optional[AtlasConfig] = None):
        self.base = base
        self.map_model = map_model
        self.reduce_model = reduce_model
        self.config = config or AtlasConfig()
        self.name = "atlas"
        #: task_id -> clock at which the current wait started
        self._waits: dict[str, int] = {}

    # -- engine hooks ---------------------------------------------------

    def on_heartbeat_cycle(self, engine: Engine, failed_fraction: float) -> None:
        engine.cluster.heartbeat.adapt(failed_fraction)

    def on_task_round_failed(self, engine: Engine, task: Task) -> None:
        task.penalty += self.config.penalty_increment
        engine.stats.penalties_applied += self.config.penalty_increment
        self._waits.pop(task.task_id, None)

    # -- prediction -------------------------------------------------------

    def _predict(self, engine: Engine, task: Task, node_id: str) -> tuple[str, float]:
        node = engine.cluster.nodes[node_id]
        job = engine.job_by_id[task.job_id]
        fv = extract_features(task, job, node, engine.stats.finished_tasks,
                              engine.stats.failed_tasks, engine.clock)
        model = self.map_model if task.task_type is TaskType.MAP else self.reduce_model
        return model.predict(fv)

    # -- availability -----------------------------------------------------

    def _data_available(self, engine: Engine, task: Task) -> bool:
        """At least one holder of the task's input replicas is reachable."""
        if task.task_type is TaskType.MAP and task.preferred_nodes:
            return any(engine.cluster.reachable(n) for n in task.preferred_nodes)
        return True

    def _fanout_candidates(self, engine: Engine, task: Task) -> list[str]:
        """Reachable, believed-alive nodes with a free slot and resource
        headroom, ranked for redundant copies.

        Nodes the task already failed on go last (repeating a placement
        repeats whatever broke it), then workers with a cleaner attempt
        history win, then the ones closer to the task's data.
        """
        cluster = engine.cluster
        job = engine.job_by_id[task.job_id]
        demand = job.resource_profile
        preferred = set(task.preferred_nodes)
        preferred_racks = {cluster.nodes[n].rack_id for n in preferred if n in cluster.nodes}
        failed_on = {a.node_id for a in task.attempts
                     if a.status.value in ("FAILED", "FAILED_TIMEOUT")}

        def rank(node):
            fail_rate = node.tt_failed / (node.tt_failed + node.tt_finished + 1)
            if node.node_id in preferred:
                tier = 0
            elif node.rack_id in preferred_racks:
                tier = 1
            else:
                tier = 2
            return (1 if node.node_id in failed_on else 0, round(fail_rate, 3),
                    tier, -node.free_slots(task.task_type), node.node_id)

        candidates = []
        for node_id, node in cluster.nodes.items():
            if not cluster.believed_alive(node_id) or not cluster.reachable(node_id):
                continue
            if node.free_slots(task.task_type) <= 0:
                continue
            if node.used_cpu(lambda a: self._demand_of(engine, a)) + demand.cpu > node.cpu_capacity:
                continue
            if node.used_mem(lambda a: self._demand_of(engine, a)) + demand.mem_mb > node.mem_capacity:
                continue
            candidates.append(node_id)
        candidates.sort(key=lambda nid: rank(cluster.nodes[nid]))
        return candidates

    def _demand_of(self, engine: Engine, att):
        task = engine.task_by_id[att.task_id]
        return engine.job_by_id[task.job_id].resource_profile

    # -- waits --------------------------------------------------------------

    def _park(self, engine: Engine, task: Task) -> None:
        """Leave the task pending with a running wait clock."""
        if task.task_id not in self._waits:
            self._waits[task.task_id] = engine.clock
        deadline = self._waits[task.task_id] + engine.cluster.attempt_timeout_ms + 1
        engine.request_tick(deadline, task.task_id)

    def _expired_wait(self, engine: Engine) -> Optional[Requeue]:
        timeout = engine.cluster.attempt_timeout_ms
        for task_id in sorted(self._waits, key=lambda tid: (self._waits[tid], tid)):
            task = engine.task_by_id[task_id]
            if task.status is not TaskStatus.PENDING:
                del self._waits[task_id]
                continue
            if engine.clock - self._waits[task_id] > timeout:
                del self._waits[task_id]
                return Requeue(task, self.config.penalty_increment)
        return None

    # -- main decision ------------------------------------------------------

    def decide(self, engine: Engine):
        expired = self._expired_wait(engine)
        if expired is not None:
            engine.log_decision({"task": expired.task.task_id,
                                 "decision": "requeue_penalty",
                                 "penalty": expired.task.penalty + expired.penalty_delta})
            return expired

        eligible = engine.eligible_tasks()
        parked: set[str] = set()
        while True:
            offer = [t for t in eligible if t.task_id not in parked]
            proposal = None
            for penalty in sorted({t.penalty for t in offer}):
                cls = [t for t in offer if t.penalty == penalty]
                proposal = self.base.propose(engine, cls)
                if proposal is not None:
                    break
            if proposal is None:
                return self._speculation_passthrough(engine)
            task, node_id = proposal
            if not self._data_available(engine, task):
                # every replica holder is down; only reactivation can help
                self._park(engine, task)
                parked.add(task.task_id)
                engine.log_decision({"task": task.task_id,
                                     "decision": "await_activation",
                                     "reason": "data_unreachable"})
                continue
            if not engine.cluster.reachable(node_id):
                # the proposed worker is actually down; place the task on a
                # different reachable machine instead of feeding the blind spot
                unreachable = {nid for nid in engine.cluster.nodes
                               if not engine.cluster.reachable(nid)}
                alt = self.base.pick_node(engine, task, exclude=unreachable)
                if alt is None:
                    self._park(engine, task)
                    parked.add(task.task_id)
                    engine.log_decision({"task": task.task_id, "node": node_id,
                                         "decision": "await_activation",
                                         "reason": "worker_unreachable"})
                    continue
                node_id = alt
            label, p_fail = self._predict(engine, task, node_id)
            if label == SUCCEED_PRED:
                self._waits.pop(task.task_id, None)
                engine.log_decision({"task": task.task_id, "node": node_id,
                                     "decision": "assign",
                                     "predicted": label, "p_fail": round(p_fail, 6)})
                return Assign(task, node_id, predicted=label)
            # predicted to fail: redundant copies on distinct nearby nodes
            attempts_left = engine.cluster.max_attempts(task.task_type) - len(task.attempts)
            fanout = min(self.config.speculative_fanout, attempts_left)
            candidates = self._fanout_candidates(engine, task)
            if fanout >= 1 and len(candidates) >= fanout:
                self._waits.pop(task.task_id, None)
                chosen = tuple(candidates[:fanout])
                engine.log_decision({"task": task.task_id, "nodes": list(chosen),
                                     "decision": "speculative_multi_launch",
                                     "predicted": label, "p_fail": round(p_fail, 6)})
                if fanout == 1:
                    return Assign(task, chosen[0], predicted=label)
                return SpeculativeAssign(task, chosen, predicted=label)
            # not enough resources: wait until enough distinct nodes free up
            self._park(engine, task)
            parked.add(task.task_id)
            engine.log_decision({"task": task.task_id,
                                 "decision": "await_resources",
                                 "predicted": label, "p_fail": round(p_fail, 6)})

    def _speculation_passthrough(self, engine: Engine):
        """Delegate the base policy's straggler speculation, availability-checked."""
        copy = self.base.straggler_copy(engine)
        if copy is None:
            return WAIT
        if all(engine.cluster.reachable(nid) for nid in copy.node_ids):
            return copy
        return WAIT
