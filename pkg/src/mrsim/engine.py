"""Deterministic discrete-event engine for the cluster simulation.

Events live in a min-heap keyed by (time, insertion sequence); equal-time
events therefore process in insertion order and a fixed seed reproduces the
exact same trace. After every batch of same-time events the engine hands the
scheduler a run of decisions to apply (assign, speculative assign, requeue)
until it answers Wait.

Liveness protocol: nodes heartbeat every ``current_interval``; the controller
declares a node lost once no heartbeat arrived for ``expiry_multiple x
interval``, and only then fails the attempts parked on it. Between a death
and its detection the node still looks usable to belief-based schedulers;
assignments made into that window become black-hole attempts that burn time
until detection or timeout.
"""

from __future__ import annotations

import dataclasses
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .cluster import Cluster, Node, NodeState
from .failures import FailurePlan, attempt_outcome, compile_plan
from .features import extract_features
from .schedulers import Assign, Requeue, SpeculativeAssign, Wait
from .workload import (AttemptStatus, Chain, Job, JobStatus, Task, TaskAttempt,
                       TaskStatus, TaskType, assign_block_replicas,
                       sample_duration)


class EventKind(str, Enum):
    JOB_SUBMITTED = "JobSubmitted"
    ATTEMPT_START = "AttemptStart"
    ATTEMPT_FINISH = "AttemptFinish"
    ATTEMPT_FAIL = "AttemptFail"
    HEARTBEAT = "Heartbeat"
    NODE_FAIL = "NodeFail"
    NODE_RECOVER = "NodeRecover"
    TIMEOUT_CHECK = "TimeoutCheck"
    SCHEDULER_TICK = "SchedulerTick"


class SimError(Exception):
    pass


class EventTimeError(SimError):
    """An event was scheduled in the past; engine bug."""


class NoSlotError(SimError):
    pass


class NodeDeadError(SimError):
    pass


class AttemptsExhaustedError(SimError):
    pass


class SchedulerBugError(SimError):
    """A scheduler decision violated slot or liveness constraints."""


@dataclass
class SimStats:
    finished_tasks: int = 0
    failed_tasks: int = 0
    killed_tasks: int = 0
    node_dead_errors: int = 0
    blackhole_attempts: int = 0
    penalties_applied: int = 0
    truncated_jobs: int = 0
    prediction_deployed: bool = False
    pred_tp: int = 0
    pred_tn: int = 0
    pred_fp: int = 0
    pred_fn: int = 0
    heartbeat_final_interval_ms: int = 0
    heartbeat_min_interval_seen_ms: int = 0
    node_death_times: list = field(default_factory=list)


@dataclass
class RunResult:
    jobs: list
    chains: list
    cluster: Cluster
    stats: SimStats
    trace: list
    attempt_log: list
    decision_log: list
    scheduler_name: str
    seed: int
    horizon_ms: int
    clock_end_ms: int
    config_echo: dict


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Named independent substreams derived from one run seed. The layout is
    part of the reproducibility contract: do not reorder."""
    children = np.random.SeedSequence(seed).spawn(5)
    names = ("workload", "replicas", "plan", "durations", "outcomes")
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


class Engine:
    """One simulation run: cluster + workload + failure plan + scheduler."""

    def __init__(self, cluster: Cluster, chains: list[Chain], plan: FailurePlan,
                 scheduler, seed: int, horizon_ms: int,
                 config_echo: Optional[dict] = None,
                 streams: Optional[dict] = None,
                 collect_trace: bool = True,
                 collect_decisions: bool = False):
        self.cluster = cluster
        self.chains = chains
        self.plan = plan
        self.scheduler = scheduler
        self.seed = seed
        self.horizon_ms = int(horizon_ms)
        self.config_echo = config_echo or {"scenario_digest": "adhoc"}
        self.collect_trace = collect_trace
        self.collect_decisions = collect_decisions

        streams = streams or rng_streams(seed)
        self._replica_rng = streams["replicas"]
        self._plan_rng = streams["plan"]
        self._duration_rng = streams["durations"]
        self._outcome_rng = streams["outcomes"]

        self.clock = 0
        self._seq = 0
        self._heap: list = []
        self.trace: list = []
        self.attempt_log: list = []
        self.decision_log: list = []
        self.stats = SimStats()

        self.jobs: list[Job] = [job for chain in chains for job in chain.jobs]
        self.job_by_id = {job.job_id: job for job in self.jobs}
        self.task_by_id = {t.task_id: t for job in self.jobs for t in job.tasks}
        self._successors: dict[str, list[str]] = {}
        for job in self.jobs:
            for pred in job.predecessors:
                self._successors.setdefault(pred, []).append(job.job_id)

        for job in self.jobs:
            assign_block_replicas(job, self.cluster.node_ids, self._replica_rng)
        self.compiled_plan = compile_plan(plan, self.cluster.node_ids,
                                          self.horizon_ms, self._plan_rng)
        self._last_cycle_at = 0
        self._wait_ticks: set = set()
        self._finished = False

    # ------------------------------------------------------------------
    # event queue
    # ------------------------------------------------------------------

    def schedule_event(self, at: int, kind: EventKind, **payload) -> None:
        if at < self.clock:
            raise EventTimeError(f"event {kind.value} at {at} is before clock {self.clock}")
        heapq.heappush(self._heap, (at, self._seq, kind, payload))
        self._seq += 1

    def _emit(self, kind: EventKind, **fields) -> None:
        """Record one state-changing occurrence in the trace."""
        if not self.collect_trace:
            self._seq += 1
            return
        rec = {"at": self.clock, "seq": self._seq, "kind": kind.value}
        rec.update(fields)
        self.trace.append(rec)
        self._seq += 1

    # ------------------------------------------------------------------
    # run loop
    # ------------------------------------------------------------------

    def _bootstrap(self) -> None:
        for job in self.jobs:
            self.schedule_event(job.submit_ms, EventKind.JOB_SUBMITTED, job=job)
        for entry in self.compiled_plan:
            if entry.kind == "NODE_KILL":
                self.schedule_event(entry.at, EventKind.NODE_FAIL, mode="kill", node=entry.node)
            elif entry.kind == "NODE_SLOW":
                self.schedule_event(entry.at, EventKind.NODE_FAIL, mode="slow", node=entry.node)
            elif entry.kind == "NODE_RECOVER":
                self.schedule_event(entry.at, EventKind.NODE_RECOVER, mode="recover", node=entry.node)
            elif entry.kind == "NETWORK_PARTITION":
                self.schedule_event(entry.at, EventKind.NODE_FAIL, mode="partition", rack=entry.rack)
                self.schedule_event(entry.at + (entry.duration_ms or 0),
                                    EventKind.NODE_RECOVER, mode="partition_end", rack=entry.rack)
            elif entry.kind == "TASK_KILL":
                self.schedule_event(entry.at, EventKind.ATTEMPT_FAIL, injected=True, task_id=entry.task)
        interval = self.cluster.heartbeat.current_interval_ms
        for node_id in self.cluster.node_ids:
            self.schedule_event(interval, EventKind.HEARTBEAT, node=node_id)
        self.schedule_event(interval, EventKind.HEARTBEAT, who="jobtracker")
        self.stats.heartbeat_final_interval_ms = interval
        self.stats.heartbeat_min_interval_seen_ms = interval

    def run(self, until: Optional[int] = None) -> RunResult:
        """Process every event up to the horizon and return the run result."""
        end = self.horizon_ms if until is None else min(until, self.horizon_ms)
        if not self._finished:
            self._bootstrap()
        while self._heap and self._heap[0][0] <= end:
            at = self._heap[0][0]
            self.clock = at
            while self._heap and self._heap[0][0] == at:
                _, _, kind, payload = heapq.heappop(self._heap)
                self._dispatch(kind, payload)
            self._scheduling_pass()
        self._finished = True
        self._finalize_truncated()
        self.stats.heartbeat_final_interval_ms = self.cluster.heartbeat.current_interval_ms
        return RunResult(
            jobs=self.jobs, chains=self.chains, cluster=self.cluster,
            stats=self.stats, trace=self.trace, attempt_log=self.attempt_log,
            decision_log=self.decision_log,
            scheduler_name=getattr(self.scheduler, "name", "unknown"),
            seed=self.seed, horizon_ms=self.horizon_ms, clock_end_ms=self.clock,
            config_echo=self.config_echo,
        )

    run_until = run

    def _finalize_truncated(self) -> None:
        for job in self.jobs:
            if job.status in (JobStatus.FINISHED, JobStatus.FAILED):
                continue
            self.stats.truncated_jobs += 1
            for task in job.tasks:
                for att in task.running_attempts:
                    self._kill_attempt(task, att)
                if task.status not in (TaskStatus.FINISHED, TaskStatus.FAILED):
                    task.status = TaskStatus.KILLED
                    self.stats.killed_tasks += 1
            job.status = JobStatus.FAILED

    # ------------------------------------------------------------------
    # event handlers
    # ------------------------------------------------------------------

    def _dispatch(self, kind: EventKind, payload: dict) -> None:
        if kind is EventKind.JOB_SUBMITTED:
            job = payload["job"]
            self._emit(kind, job=job.job_id)
        elif kind is EventKind.HEARTBEAT:
            if payload.get("who") == "jobtracker":
                self._jobtracker_cycle()
            else:
                self.process_heartbeat(payload["node"])
        elif kind is EventKind.TIMEOUT_CHECK:
            self._handle_timeout_check(payload)
        elif kind is EventKind.ATTEMPT_FINISH:
            self._handle_attempt_terminal(payload, AttemptStatus.FINISHED)
        elif kind is EventKind.ATTEMPT_FAIL:
            if payload.get("injected"):
                self._handle_injected_kill(payload)
            else:
                self._handle_attempt_terminal(payload, AttemptStatus.FAILED)
        elif kind is EventKind.NODE_FAIL:
            self._handle_node_fail(payload)
        elif kind is EventKind.NODE_RECOVER:
            self._handle_node_recover(payload)
        elif kind is EventKind.SCHEDULER_TICK:
            self._wait_ticks.discard((payload.get("task_id"), payload.get("tick_at")))
            self._emit(kind, task=payload.get("task_id"))

    # -- heartbeats ----------------------------------------------------

    def process_heartbeat(self, node_id: str) -> None:
        if node_id not in self.cluster.nodes:
            raise SimError(f"unknown node {node_id!r}")
        node = self.cluster.nodes[node_id]
        if node.state is NodeState.DEAD:
            return  # the worker is gone; its beat chain ends here
        interval = self.cluster.heartbeat.current_interval_ms
        if node.rack_id in self.cluster.partitioned_racks:
            # the node keeps trying but nothing reaches the controller
            self.schedule_event(self.clock + interval, EventKind.HEARTBEAT, node=node_id)
            return
        node.last_heartbeat = self.clock
        if node.lost:
            node.lost = False
            self._emit(EventKind.HEARTBEAT, node=node_id, rejoined=True)
        else:
            self._emit(EventKind.HEARTBEAT, node=node_id)
        self.schedule_event(self.clock + interval, EventKind.HEARTBEAT, node=node_id)
        self.schedule_event(self.clock + self.cluster.expiry_ms() + 1,
                            EventKind.TIMEOUT_CHECK, check="node", node=node_id)

    def _jobtracker_cycle(self) -> None:
        deaths = sum(1 for t in self.stats.node_death_times
                     if self._last_cycle_at < t <= self.clock)
        fraction = deaths / len(self.cluster.nodes)
        self.scheduler.on_heartbeat_cycle(self, fraction)
        hb = self.cluster.heartbeat
        self.stats.heartbeat_min_interval_seen_ms = min(
            self.stats.heartbeat_min_interval_seen_ms, hb.current_interval_ms)
        self._emit(EventKind.HEARTBEAT, who="jobtracker",
                   failed_fraction=round(fraction, 6),
                   interval_ms=hb.current_interval_ms)
        for node_id, node in self.cluster.nodes.items():
            if not node.lost and self.clock - node.last_heartbeat > self.cluster.expiry_ms():
                self._declare_lost(node)
        self._last_cycle_at = self.clock
        self.schedule_event(self.clock + hb.current_interval_ms,
                            EventKind.HEARTBEAT, who="jobtracker")

    def _declare_lost(self, node: Node) -> None:
        node.lost = True
        self._emit(EventKind.TIMEOUT_CHECK, action="node_lost", node=node.node_id)
        for att in list(node.running()):
            task = self.task_by_id[att.task_id]
            self._terminate_attempt(task, att, AttemptStatus.FAILED)

    # -- timeouts --------------------------------------------------------

    def _handle_timeout_check(self, payload: dict) -> None:
        if payload.get("check") == "node":
            node = self.cluster.nodes[payload["node"]]
            if not node.lost and self.clock - node.last_heartbeat > self.cluster.expiry_ms():
                self._declare_lost(node)
        elif payload.get("check") == "attempt":
            self.enforce_timeout(payload["task"], payload["attempt"])

    def enforce_timeout(self, task: Task, att: TaskAttempt) -> None:
        """Fail an attempt that has been running longer than the timeout."""
        if att.status is not AttemptStatus.RUNNING:
            return
        if self.clock - att.start > self.cluster.attempt_timeout_ms:
            self._terminate_attempt(task, att, AttemptStatus.FAILED_TIMEOUT)

    # -- node failures ----------------------------------------------------

    def _handle_node_fail(self, payload: dict) -> None:
        mode = payload["mode"]
        if mode == "partition":
            self.cluster.partitioned_racks.add(payload["rack"])
            self._emit(EventKind.NODE_FAIL, mode=mode, rack=payload["rack"])
            return
        node = self.cluster.nodes.get(payload["node"])
        if node is None or node.state is NodeState.DEAD:
            return  # unresolvable or already dead: injection is a no-op
        if mode == "kill":
            node.state = NodeState.DEAD
            node.death_at = self.clock
            self.stats.node_death_times.append(self.clock)
            self._emit(EventKind.NODE_FAIL, mode=mode, node=node.node_id)
        elif mode == "slow":
            node.state = NodeState.SLOW
            node.slowdown = self.plan.slowdown_factor
            self._emit(EventKind.NODE_FAIL, mode=mode, node=node.node_id,
                       slowdown=node.slowdown)

    def _handle_node_recover(self, payload: dict) -> None:
        mode = payload["mode"]
        if mode == "partition_end":
            if payload["rack"] in self.cluster.partitioned_racks:
                self.cluster.partitioned_racks.discard(payload["rack"])
                self._emit(EventKind.NODE_RECOVER, mode=mode, rack=payload["rack"])
            return
        node = self.cluster.nodes.get(payload["node"])
        if node is None or node.state is NodeState.ALIVE:
            return
        was_dead = node.state is NodeState.DEAD
        if was_dead:
            # a restarted worker comes back empty; whatever ran there is gone
            for att in list(node.running()):
                task = self.task_by_id[att.task_id]
                self._terminate_attempt(task, att, AttemptStatus.FAILED)
        node.state = NodeState.ALIVE
        node.slowdown = 1.0
        node.death_at = None
        self._emit(EventKind.NODE_RECOVER, mode=mode, node=node.node_id)
        if was_dead:
            # re-registration counts as a heartbeat and restarts the chain
            node.last_heartbeat = self.clock
            node.lost = False
            self.schedule_event(self.clock + self.cluster.heartbeat.current_interval_ms,
                                EventKind.HEARTBEAT, node=node.node_id)

    def _handle_injected_kill(self, payload: dict) -> None:
        task = self.task_by_id.get(payload.get("task_id", ""))
        if task is None:
            return
        running = task.running_attempts
        if not running:
            return
        self._emit(EventKind.ATTEMPT_FAIL, task=task.task_id, injected=True)
        for att in list(running):
            self._terminate_attempt(task, att, AttemptStatus.FAILED)

    # -- attempt lifecycle ---------------------------------------------

    def _handle_attempt_terminal(self, payload: dict, status: AttemptStatus) -> None:
        att: TaskAttempt = payload["attempt"]
        task: Task = payload["task"]
        if att.status is not AttemptStatus.RUNNING:
            return  # superseded (killed, timed out, or failed at detection)
        node = self.cluster.nodes[att.node_id]
        if node.state is NodeState.DEAD:
            return  # zombie: outcome will be decided by loss detection
        self._terminate_attempt(task, att, status)

    def _occupy_slot(self, node: Node, task: Task, att: TaskAttempt) -> None:
        if task.task_type is TaskType.MAP:
            node.running_map.append(att)
        else:
            node.running_reduce.append(att)

    def _release_slot(self, node: Node, task: Task, att: TaskAttempt) -> None:
        bucket = node.running_map if task.task_type is TaskType.MAP else node.running_reduce
        if att in bucket:
            bucket.remove(att)

    def _exec_span(self, att: TaskAttempt, node: Node) -> int:
        if att.planned_ms is None:
            return 0
        stop = att.end
        if node.death_at is not None and node.death_at >= att.start:
            stop = min(stop, node.death_at)
        return max(0, stop - att.start)

    def _terminate_attempt(self, task: Task, att: TaskAttempt,
                           status: AttemptStatus) -> None:
        node = self.cluster.nodes[att.node_id]
        att.status = status
        att.end = self.clock
        att.exec_ms = self._exec_span(att, node)
        self._release_slot(node, task, att)
        if status is AttemptStatus.FINISHED:
            node.tt_finished += 1
            self._emit(EventKind.ATTEMPT_FINISH, task=task.task_id,
                       attempt=att.attempt_id, node=att.node_id)
        else:
            node.tt_failed += 1
            self._emit(EventKind.ATTEMPT_FAIL, task=task.task_id,
                       attempt=att.attempt_id, node=att.node_id, status=status.value)
        self._log_attempt(task, att)
        self._score_prediction(att)
        self._resolve_task(task, status)

    def _kill_attempt(self, task: Task, att: TaskAttempt) -> None:
        node = self.cluster.nodes[att.node_id]
        att.status = AttemptStatus.KILLED
        att.end = self.clock
        att.exec_ms = self._exec_span(att, node)
        self._release_slot(node, task, att)
        self._emit(EventKind.ATTEMPT_FAIL, task=task.task_id,
                   attempt=att.attempt_id, node=att.node_id,
                   status=AttemptStatus.KILLED.value)
        self._log_attempt(task, att)

    def _log_attempt(self, task: Task, att: TaskAttempt) -> None:
        rec = att.to_record()
        rec["job_id"] = task.job_id
        rec["features"] = att.features
        self.attempt_log.append(rec)

    def _score_prediction(self, att: TaskAttempt) -> None:
        if att.predicted is None:
            return
        self.stats.prediction_deployed = True
        pred_fail = att.predicted == "FAIL_PRED"
        actually_failed = att.status is not AttemptStatus.FINISHED
        if pred_fail and actually_failed:
            self.stats.pred_tp += 1
        elif pred_fail and not actually_failed:
            self.stats.pred_fp += 1
        elif not pred_fail and actually_failed:
            self.stats.pred_fn += 1
        else:
            self.stats.pred_tn += 1

    def _resolve_task(self, task: Task, status: AttemptStatus) -> None:
        job = self.job_by_id[task.job_id]
        if status is AttemptStatus.FINISHED:
            if task.status is TaskStatus.FINISHED:
                return
            task.status = TaskStatus.FINISHED
            self.stats.finished_tasks += 1
            for sibling in list(task.running_attempts):
                self._kill_attempt(task, sibling)
            if job.all_tasks_terminal() and all(
                    t.status is TaskStatus.FINISHED for t in job.tasks):
                job.status = JobStatus.FINISHED
                job.finish_ms = self.clock
            return
        # a failure only closes the round once no copy is still running
        if task.running_attempts or task.status is TaskStatus.FINISHED:
            return
        self.scheduler.on_task_round_failed(self, task)
        if len(task.attempts) >= self.cluster.max_attempts(task.task_type):
            task.status = TaskStatus.FAILED
            self.stats.failed_tasks += 1
            self._fail_job(job)
        else:
            task.status = TaskStatus.PENDING
            task.reschedule_events += 1

    def _fail_job(self, job: Job) -> None:
        if job.status in (JobStatus.FINISHED, JobStatus.FAILED):
            return
        job.status = JobStatus.FAILED
        job.finish_ms = self.clock
        for task in job.tasks:
            if task.status in (TaskStatus.PENDING, TaskStatus.RUNNING):
                for att in list(task.running_attempts):
                    self._kill_attempt(task, att)
                task.status = TaskStatus.KILLED
                self.stats.killed_tasks += 1
        for succ_id in self._successors.get(job.job_id, []):
            self._fail_job(self.job_by_id[succ_id])

    # ------------------------------------------------------------------
    # attempt start
    # ------------------------------------------------------------------

    def start_attempt(self, task: Task, node_id: str,
                      speculative: bool = False) -> TaskAttempt:
        """Start one attempt; raises when a precondition is violated."""
        node = self.cluster.nodes[node_id]
        if len(task.attempts) >= self.cluster.max_attempts(task.task_type):
            self._exhaust(task)
            raise AttemptsExhaustedError(f"{task.task_id} has no attempts left")
        if not self.cluster.reachable(node_id):
            raise NodeDeadError(f"node {node_id} is unreachable")
        if node.free_slots(task.task_type) <= 0:
            raise NoSlotError(f"no free {task.task_type.value} slot on {node_id}")
        return self._launch(task, node, speculative, blackhole=False, predicted=None)

    def _exhaust(self, task: Task) -> None:
        if task.status is not TaskStatus.FAILED:
            task.status = TaskStatus.FAILED
            self.stats.failed_tasks += 1
            self._fail_job(self.job_by_id[task.job_id])

    def _launch(self, task: Task, node: Node, speculative: bool,
                blackhole: bool, predicted: Optional[str]) -> TaskAttempt:
        job = self.job_by_id[task.job_id]
        local = task.task_type is TaskType.MAP and node.node_id in task.preferred_nodes
        fv = extract_features(task, job, node, self.stats.finished_tasks,
                              self.stats.failed_tasks, self.clock, speculative)
        att = TaskAttempt(
            attempt_id=len(task.attempts),
            task_id=task.task_id,
            node_id=node.node_id,
            start=self.clock,
            speculative=speculative,
            local=local,
            predicted=predicted,
        )
        features = dataclasses.asdict(fv)
        features.pop("label", None)
        att.features = features
        task.attempts.append(att)
        task.status = TaskStatus.RUNNING
        if job.status is JobStatus.PENDING:
            job.status = JobStatus.RUNNING
        self._occupy_slot(node, task, att)
        if not blackhole:
            att.planned_ms = sample_duration(job, task, self._duration_rng,
                                             slowdown=node.slowdown,
                                             local=local or task.task_type is TaskType.REDUCE)
            will_finish = attempt_outcome(self.plan, node, len(node.running()),
                                          self._outcome_rng)
            kind = EventKind.ATTEMPT_FINISH if will_finish else EventKind.ATTEMPT_FAIL
            self.schedule_event(self.clock + att.planned_ms, kind, task=task, attempt=att)
        self.schedule_event(self.clock + self.cluster.attempt_timeout_ms + 1,
                            EventKind.TIMEOUT_CHECK, check="attempt",
                            task=task, attempt=att)
        self._emit(EventKind.ATTEMPT_START, task=task.task_id,
                   attempt=att.attempt_id, node=node.node_id,
                   speculative=speculative, blackhole=blackhole)
        return att

    # ------------------------------------------------------------------
    # scheduling
    # ------------------------------------------------------------------

    def eligible_tasks(self) -> list[Task]:
        """Pending tasks whose barriers are satisfied, in stable job order."""
        out = []
        for job in self.jobs:
            if job.status is JobStatus.FAILED or job.submit_ms > self.clock:
                continue
            if any(self.job_by_id[p].status is not JobStatus.FINISHED
                   for p in job.predecessors):
                continue
            maps_done = job.maps_finished()
            for task in job.tasks:
                if task.status is not TaskStatus.PENDING:
                    continue
                if task.task_type is TaskType.REDUCE and not maps_done:
                    continue
                out.append(task)
        return out

    def request_tick(self, at: int, task_id: str) -> None:
        """Guarantee a scheduling pass at ``at`` (used for wait deadlines)."""
        key = (task_id, at)
        if key in self._wait_ticks or at <= self.clock:
            return
        self._wait_ticks.add(key)
        self.schedule_event(at, EventKind.SCHEDULER_TICK, task_id=task_id, tick_at=at)

    def log_decision(self, record: dict) -> None:
        if self.collect_decisions:
            record["at"] = self.clock
            self.decision_log.append(record)

    def _scheduling_pass(self) -> None:
        limit = 10 * (self.cluster.total_slots() + len(self.task_by_id) + 5)
        for _ in range(limit):
            decision = self.scheduler.decide(self)
            if isinstance(decision, Wait):
                return
            if isinstance(decision, Assign):
                self._apply_assign(decision.task, decision.node_id,
                                   speculative=False, predicted=decision.predicted)
            elif isinstance(decision, SpeculativeAssign):
                for node_id in decision.node_ids:
                    self._apply_assign(decision.task, node_id,
                                       speculative=True, predicted=decision.predicted)
            elif isinstance(decision, Requeue):
                task = decision.task
                if task.status is not TaskStatus.PENDING:
                    raise SchedulerBugError(f"requeue of non-pending task {task.task_id}")
                task.penalty += decision.penalty_delta
                self.stats.penalties_applied += decision.penalty_delta
            else:
                raise SchedulerBugError(f"unknown decision {decision!r}")
        raise SchedulerBugError("scheduling pass did not converge")

    def _apply_assign(self, task: Task, node_id: str, speculative: bool,
                      predicted: Optional[str]) -> None:
        node = self.cluster.nodes[node_id]
        if not self.cluster.believed_alive(node_id):
            raise SchedulerBugError(f"assigned {task.task_id} to lost node {node_id}")
        if node.free_slots(task.task_type) <= 0:
            raise SchedulerBugError(f"assigned {task.task_id} to full node {node_id}")
        if len(task.attempts) >= self.cluster.max_attempts(task.task_type):
            raise SchedulerBugError(f"assigned exhausted task {task.task_id}")
        if not self.cluster.reachable(node_id):
            # the node looked fine to the controller but is actually gone:
            # the work disappears into the blind window
            self.stats.node_dead_errors += 1
            self.stats.blackhole_attempts += 1
            self._launch(task, node, speculative, blackhole=True, predicted=predicted)
            return
        self._launch(task, node, speculative, blackhole=False, predicted=predicted)
