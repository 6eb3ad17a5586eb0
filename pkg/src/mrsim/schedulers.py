"""Baseline schedulers: FIFO, Fair, and Capacity, plus straggler speculation.

Schedulers are pure decision functions over the engine's current state. They
see the controller's *belief* about the cluster (a node is usable until it
has been declared lost), which is exactly how they can be tricked into
assigning work to a node that died since its last heartbeat.

Every policy shares the same node-selection rule: a map prefers the first of
its replica-holder nodes with a free slot; otherwise (and for reduces) the
believed-alive node with the most free slots of the right type wins, ties
broken by node id.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Optional

from .workload import Job, Task, TaskType


@dataclass(frozen=True)
class Assign:
    task: Task
    node_id: str
    #: Label the failure predictor attached to this decision, when one ran.
    predicted: Optional[str] = None


@dataclass(frozen=True)
class SpeculativeAssign:
    task: Task
    node_ids: tuple
    predicted: Optional[str] = None


@dataclass(frozen=True)
class Requeue:
    task: Task
    penalty_delta: int = 1


class Wait:
    """Nothing schedulable right now."""


WAIT = Wait()


@dataclass
class SpeculationConfig:
    """Straggler mitigation for the baselines."""

    enabled: bool = False
    #: Launch a copy when an attempt's progress ratio lags the job median
    #: by more than this absolute gap.
    gap_threshold: float = 0.5


@dataclass
class FairConfig:
    default_weight: float = 1.0
    default_min_share: int = 0
    per_job: dict = field(default_factory=dict)

    def weight(self, job_id: str) -> float:
        return float(self.per_job.get(job_id, {}).get("weight", self.default_weight))

    def min_share(self, job_id: str) -> int:
        return int(self.per_job.get(job_id, {}).get("min_share", self.default_min_share))


@dataclass
class CapacityConfig:
    #: queue name -> capacity fraction of all slots
    queues: dict
    #: job_type or job_id -> queue name
    mapping: dict = field(default_factory=dict)
    default_queue: str = "default"

    def __post_init__(self) -> None:
        if not self.queues:
            raise ValueError("capacity scheduler needs at least one queue")
        total = sum(self.queues.values())
        if total > 1.0 + 1e-9:
            raise ValueError(f"queue capacity fractions sum to {total} > 1")
        if self.default_queue not in self.queues:
            raise ValueError(f"default queue {self.default_queue!r} is not defined")
        for target in self.mapping.values():
            if target not in self.queues:
                raise ValueError(f"queue mapping targets unknown queue {target!r}")

    def queue_of(self, job: Job) -> str:
        if job.job_id in self.mapping:
            return self.mapping[job.job_id]
        return self.mapping.get(job.job_type, self.default_queue)


def job_order_key(job: Job):
    """Global tie-break: submit time, then priority (desc), then id."""
    return (job.submit_ms, -job.priority, job.job_id)


class BaseScheduler:
    """Shared machinery: node choice, straggler scan, decision envelope."""

    name = "base"

    def __init__(self, speculation: Optional[SpeculationConfig] = None):
        self.speculation = speculation or SpeculationConfig()

    # -- node selection -----------------------------------------------------

    def candidate_nodes(self, engine, task: Task, exclude=()) -> list[str]:
        cluster = engine.cluster
        out = []
        for node_id, node in cluster.nodes.items():
            if node_id in exclude or not cluster.believed_alive(node_id):
                continue
            if node.free_slots(task.task_type) > 0:
                out.append(node_id)
        return out

    def pick_node(self, engine, task: Task, exclude=()) -> Optional[str]:
        candidates = self.candidate_nodes(engine, task, exclude)
        if not candidates:
            return None
        if task.task_type is TaskType.MAP:
            for node_id in task.preferred_nodes:
                if node_id in candidates:
                    return node_id
        nodes = engine.cluster.nodes
        return min(candidates, key=lambda nid: (-nodes[nid].free_slots(task.task_type), nid))

    # -- per-policy task choice ---------------------------------------------

    def propose(self, engine, tasks: list[Task]):
        """Return the next (task, node_id) among the given eligible tasks,
        or None when nothing is placeable."""
        raise NotImplementedError

    def _first_placeable(self, engine, tasks: list[Task]):
        for task in tasks:
            node_id = self.pick_node(engine, task)
            if node_id is not None:
                return task, node_id
        return None

    # -- straggler speculation ----------------------------------------------

    def _attempt_progress(self, engine, att) -> float:
        if att.planned_ms is None or att.planned_ms <= 0:
            return 0.0
        return min(1.0, (engine.clock - att.start) / att.planned_ms)

    def straggler_copy(self, engine) -> Optional[SpeculativeAssign]:
        if not self.speculation.enabled:
            return None
        for job in sorted(engine.jobs, key=job_order_key):
            running = [(t, a) for t in job.tasks for a in t.running_attempts]
            if len(running) < 2:
                continue
            progresses = [self._attempt_progress(engine, a) for _, a in running]
            median = statistics.median(progresses)
            for (task, att), prog in zip(running, progresses):
                if median - prog <= self.speculation.gap_threshold:
                    continue
                if len(task.running_attempts) > 1:
                    continue  # already has a live copy
                if len(task.attempts) >= engine.cluster.max_attempts(task.task_type):
                    continue
                node_id = self.pick_node(engine, task, exclude=(att.node_id,))
                if node_id is not None:
                    return SpeculativeAssign(task, (node_id,))
        return None

    # -- engine-facing entry points -------------------------------------------

    def decide(self, engine):
        prop = self.propose(engine, engine.eligible_tasks())
        if prop is not None:
            return Assign(prop[0], prop[1])
        copy = self.straggler_copy(engine)
        if copy is not None:
            return copy
        return WAIT

    def on_heartbeat_cycle(self, engine, failed_fraction: float) -> None:
        pass

    def on_task_round_failed(self, engine, task: Task) -> None:
        pass


class FifoScheduler(BaseScheduler):
    """Strict submission order: earliest job first, skipping tasks that have
    no free slot of their type anywhere."""

    name = "fifo"

    def propose(self, engine, tasks):
        ordered = sorted(tasks, key=lambda t: job_order_key(engine.job_by_id[t.job_id]) + (t.seq,))
        return self._first_placeable(engine, ordered)


class FairScheduler(BaseScheduler):
    """Slot-count fairness across jobs with min-shares and weights."""

    name = "fair"

    def __init__(self, config: Optional[FairConfig] = None,
                 speculation: Optional[SpeculationConfig] = None):
        super().__init__(speculation)
        self.config = config or FairConfig()

    def _running_slots(self, job: Job) -> int:
        return sum(len(t.running_attempts) for t in job.tasks)

    def propose(self, engine, tasks):
        by_job: dict[str, list[Task]] = {}
        for task in tasks:
            by_job.setdefault(task.job_id, []).append(task)
        if not by_job:
            return None
        jobs = sorted((engine.job_by_id[jid] for jid in by_job), key=job_order_key)
        cfg = self.config

        def deficit(job: Job) -> int:
            return cfg.min_share(job.job_id) - self._running_slots(job)

        starved = [j for j in jobs if deficit(j) > 0]
        if starved:
            ranked = sorted(starved, key=lambda j: (-deficit(j),) + job_order_key(j))
        else:
            ranked = sorted(jobs, key=lambda j: (self._running_slots(j) / cfg.weight(j.job_id),)
                            + job_order_key(j))
        for job in ranked:
            chosen = self._first_placeable(engine, sorted(by_job[job.job_id],
                                                          key=lambda t: t.seq))
            if chosen is not None:
                return chosen
        return None


class CapacityScheduler(BaseScheduler):
    """Named queues with capacity fractions; FIFO within a queue; a queue
    may only exceed its share while every other queue is idle."""

    name = "capacity"

    def __init__(self, config: CapacityConfig,
                 speculation: Optional[SpeculationConfig] = None):
        super().__init__(speculation)
        self.config = config

    def _queue_usage(self, engine) -> dict[str, int]:
        used = {q: 0 for q in self.config.queues}
        for job in engine.jobs:
            q = self.config.queue_of(job)
            used[q] += sum(len(t.running_attempts) for t in job.tasks)
        return used

    def propose(self, engine, tasks):
        if not tasks:
            return None
        by_queue: dict[str, list[Task]] = {}
        for task in tasks:
            q = self.config.queue_of(engine.job_by_id[task.job_id])
            by_queue.setdefault(q, []).append(task)
        used = self._queue_usage(engine)
        total_slots = engine.cluster.total_slots()

        def fifo_in(queue: str):
            ordered = sorted(by_queue[queue],
                             key=lambda t: job_order_key(engine.job_by_id[t.job_id]) + (t.seq,))
            return self._first_placeable(engine, ordered)

        under = []
        for q in by_queue:
            cap_slots = self.config.queues[q] * total_slots
            if used[q] < cap_slots:
                under.append((used[q] / cap_slots if cap_slots else float("inf"), q))
        for _, q in sorted(under):
            chosen = fifo_in(q)
            if chosen is not None:
                return chosen
        # elastic sharing: one busy queue may spill past its capacity
        if len(by_queue) == 1:
            return fifo_in(next(iter(by_queue)))
        return None
