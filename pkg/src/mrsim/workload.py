"""MapReduce workload model: jobs, tasks, attempts, chains, and synthetic generation.

A workload is a list of chains; each chain is a small DAG of jobs; each job
is a set of map tasks plus a set of reduce tasks. Reduces of a job become
eligible only once all of its maps have finished; a job in a chain becomes
eligible only once all of its predecessor jobs have finished.

Generation is fully driven by a seeded numpy Generator so that the same
workload spec and seed always produce the same object graph.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class TaskType(str, Enum):
    MAP = "MAP"
    REDUCE = "REDUCE"


class AttemptStatus(str, Enum):
    RUNNING = "RUNNING"
    FINISHED = "FINISHED"
    FAILED = "FAILED"
    FAILED_TIMEOUT = "FAILED_TIMEOUT"
    KILLED = "KILLED"


#: Attempt statuses that count as a failure for retry/labeling purposes.
FAILED_STATUSES = (AttemptStatus.FAILED, AttemptStatus.FAILED_TIMEOUT)


class TaskStatus(str, Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    FINISHED = "FINISHED"
    FAILED = "FAILED"
    KILLED = "KILLED"


class JobStatus(str, Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    FINISHED = "FINISHED"
    FAILED = "FAILED"


TERMINAL_TASK_STATUSES = (TaskStatus.FINISHED, TaskStatus.FAILED, TaskStatus.KILLED)

JOB_TYPES = ("WORDCOUNT", "TERAGEN", "TERASORT")

CHAIN_KINDS = ("SINGLE", "SEQUENTIAL", "PARALLEL", "MIX")

#: HDFS-style replication factor for map input blocks.
REPLICATION_FACTOR = 3


@dataclass
class DurationProfile:
    """Lognormal duration model for one job type.

    A draw is ``scale * exp(sigma * z)`` with ``z ~ N(0, 1)``, so ``sigma=0``
    degenerates to exactly ``scale``. Non-local map reads are slowed down by
    ``remote_read_factor``.
    """

    map_scale_ms: int
    reduce_scale_ms: int
    sigma: float = 0.4
    remote_read_factor: float = 1.3


@dataclass
class ResourceProfile:
    """Abstract per-task resource demand (cpu units, MB, hdfs-rw units)."""

    cpu: float = 1.0
    mem_mb: float = 512.0
    hdfs_rw: float = 1.0


DEFAULT_DURATION_PROFILES = {
    "WORDCOUNT": DurationProfile(map_scale_ms=60_000, reduce_scale_ms=120_000),
    "TERAGEN": DurationProfile(map_scale_ms=45_000, reduce_scale_ms=90_000),
    "TERASORT": DurationProfile(map_scale_ms=90_000, reduce_scale_ms=180_000),
}

DEFAULT_RESOURCE_PROFILES = {
    "WORDCOUNT": ResourceProfile(cpu=1.0, mem_mb=512.0, hdfs_rw=1.0),
    "TERAGEN": ResourceProfile(cpu=0.8, mem_mb=256.0, hdfs_rw=2.0),
    "TERASORT": ResourceProfile(cpu=1.2, mem_mb=768.0, hdfs_rw=2.5),
}


@dataclass
class TaskAttempt:
    """One execution instance of a task on one node."""

    attempt_id: int
    node_id: str
    start: int
    task_id: str = ""
    end: Optional[int] = None
    status: AttemptStatus = AttemptStatus.RUNNING
    speculative: bool = False
    local: bool = False
    #: Sampled execution duration; None for attempts sent to an unreachable
    #: node (they never actually run).
    planned_ms: Optional[int] = None
    #: Span during which the attempt really consumed resources.
    exec_ms: int = 0
    #: Label the deployed predictor produced when this attempt was launched.
    predicted: Optional[str] = None
    #: Feature snapshot captured at the scheduling instant.
    features: Optional[dict] = None

    @property
    def duration_ms(self) -> int:
        """Wall time between start and terminal state (0 while running)."""
        return 0 if self.end is None else self.end - self.start

    def to_record(self) -> dict:
        return {
            "attempt_id": self.attempt_id,
            "task_id": self.task_id,
            "node_id": self.node_id,
            "start": self.start,
            "end": self.end,
            "status": self.status.value,
            "speculative": self.speculative,
            "local": self.local,
            "planned_ms": self.planned_ms,
            "exec_ms": self.exec_ms,
            "predicted": self.predicted,
        }


@dataclass
class Task:
    """A map or reduce task with its attempt history."""

    task_id: str
    job_id: str
    task_type: TaskType
    seq: int = 0
    preferred_nodes: tuple[str, ...] = ()
    attempts: list[TaskAttempt] = field(default_factory=list)
    status: TaskStatus = TaskStatus.PENDING
    penalty: int = 0
    reschedule_events: int = 0

    @property
    def running_attempts(self) -> list[TaskAttempt]:
        return [a for a in self.attempts if a.status is AttemptStatus.RUNNING]

    @property
    def finished_attempts(self) -> int:
        return sum(1 for a in self.attempts if a.status is AttemptStatus.FINISHED)

    @property
    def failed_attempts(self) -> int:
        return sum(1 for a in self.attempts if a.status in FAILED_STATUSES)


@dataclass
class Job:
    """A MapReduce job: X maps, Y reduces, optional chain predecessors."""

    job_id: str
    job_type: str
    priority: int
    num_maps: int
    num_reduces: int
    submit_ms: int
    chain_id: str
    duration_profile: DurationProfile
    resource_profile: ResourceProfile
    maps: list[Task] = field(default_factory=list)
    reduces: list[Task] = field(default_factory=list)
    predecessors: list[str] = field(default_factory=list)
    status: JobStatus = JobStatus.PENDING
    finish_ms: Optional[int] = None

    @property
    def tasks(self) -> list[Task]:
        return self.maps + self.reduces

    @property
    def total_tasks(self) -> int:
        return self.num_maps + self.num_reduces

    def maps_finished(self) -> bool:
        return all(t.status is TaskStatus.FINISHED for t in self.maps)

    def all_tasks_terminal(self) -> bool:
        return all(t.status in TERMINAL_TASK_STATUSES for t in self.tasks)


@dataclass
class Chain:
    """A DAG of jobs. SEQUENTIAL chains are a total order, PARALLEL have no
    edges, MIX carries explicit precedence pairs."""

    chain_id: str
    kind: str
    jobs: list[Job]
    edges: list[tuple[int, int]] = field(default_factory=list)


class WorkloadError(ValueError):
    """Malformed workload spec or cyclic chain definition."""


def _build_job(job_id: str, chain_id: str, jdef: dict, submit_ms: int,
               profiles: dict, resources: dict) -> Job:
    jtype = str(jdef.get("type", "WORDCOUNT")).upper()
    if jtype not in JOB_TYPES:
        raise WorkloadError(f"unknown job type {jtype!r} (expected one of {JOB_TYPES})")
    num_maps = int(jdef.get("maps", 1))
    num_reduces = int(jdef.get("reduces", 0 if jtype == "TERAGEN" else 1))
    if num_maps < 1:
        raise WorkloadError(f"job {job_id}: maps must be >= 1, got {num_maps}")
    if num_reduces < 0:
        raise WorkloadError(f"job {job_id}: reduces must be >= 0, got {num_reduces}")
    if jtype == "TERAGEN" and num_reduces != 0:
        raise WorkloadError(f"job {job_id}: TERAGEN is generation-only and takes 0 reduces")
    job = Job(
        job_id=job_id,
        job_type=jtype,
        priority=int(jdef.get("priority", 0)),
        num_maps=num_maps,
        num_reduces=num_reduces,
        submit_ms=submit_ms,
        chain_id=chain_id,
        duration_profile=profiles[jtype],
        resource_profile=resources[jtype],
    )
    job.maps = [Task(f"{job_id}-m{i}", job_id, TaskType.MAP, seq=i)
                for i in range(num_maps)]
    job.reduces = [Task(f"{job_id}-r{i}", job_id, TaskType.REDUCE, seq=num_maps + i)
                   for i in range(num_reduces)]
    return job


def _check_acyclic(n_jobs: int, edges: Sequence[tuple[int, int]], chain_id: str) -> None:
    """Kahn's algorithm; raises on cycles or out-of-range endpoints."""
    indeg = [0] * n_jobs
    succ: list[list[int]] = [[] for _ in range(n_jobs)]
    for a, b in edges:
        if not (0 <= a < n_jobs and 0 <= b < n_jobs) or a == b:
            raise WorkloadError(f"chain {chain_id}: bad edge ({a}, {b})")
        succ[a].append(b)
        indeg[b] += 1
    frontier = [i for i in range(n_jobs) if indeg[i] == 0]
    seen = 0
    while frontier:
        seen += 1
        for j in succ[frontier.pop()]:
            indeg[j] -= 1
            if indeg[j] == 0:
                frontier.append(j)
    if seen != n_jobs:
        raise WorkloadError(f"chain {chain_id}: precedence graph has a cycle")


def _load_profiles(spec: dict) -> tuple[dict, dict]:
    profiles = {k: DurationProfile(**vars(v)) for k, v in DEFAULT_DURATION_PROFILES.items()}
    resources = {k: ResourceProfile(**vars(v)) for k, v in DEFAULT_RESOURCE_PROFILES.items()}
    for jtype, over in (spec.get("profiles") or {}).items():
        jtype = str(jtype).upper()
        if jtype not in JOB_TYPES:
            raise WorkloadError(f"profiles: unknown job type {jtype!r}")
        for key, val in (over or {}).items():
            if hasattr(profiles[jtype], key):
                setattr(profiles[jtype], key, type(getattr(profiles[jtype], key))(val))
            elif hasattr(resources[jtype], key):
                setattr(resources[jtype], key, float(val))
            else:
                raise WorkloadError(f"profiles.{jtype}: unknown key {key!r}")
    return profiles, resources


def generate_workload(spec: dict, rng: np.random.Generator) -> list[Chain]:
    """Expand a workload spec into a concrete list of chains.

    Spec schema (YAML/JSON):
      arrival: {kind: poisson|fixed, mean_interarrival_ms | interval_ms, start_ms}
      chains:
        - kind: single|sequential|parallel|mix
          job: {...}            # single only
          jobs: [{...}, ...]    # chained kinds
          edges: [[a, b], ...]  # mix only
          count: 3              # replicate the template
      profiles: {WORDCOUNT: {map_scale_ms: ..., sigma: ...}, ...}

    Each chain template instance draws one arrival time; all jobs of the
    chain share it as their submit time (downstream jobs are additionally
    gated by their precedence edges at run time).
    """
    if not isinstance(spec, dict) or "chains" not in spec:
        raise WorkloadError("workload spec must be a mapping with a 'chains' list")
    profiles, resources = _load_profiles(spec)

    arrival = spec.get("arrival") or {"kind": "fixed", "interval_ms": 0}
    akind = str(arrival.get("kind", "fixed")).lower()
    start_ms = int(arrival.get("start_ms", 0))

    def next_arrival(prev: int, first: bool) -> int:
        if akind == "poisson":
            mean = float(arrival.get("mean_interarrival_ms", 60_000))
            if mean <= 0:
                raise WorkloadError("arrival.mean_interarrival_ms must be > 0")
            return prev + int(round(rng.exponential(mean)))
        if akind == "fixed":
            if first:
                return prev
            return prev + int(arrival.get("interval_ms", 0))
        raise WorkloadError(f"unknown arrival kind {akind!r}")

    chains: list[Chain] = []
    clock = start_ms
    chain_seq = 0
    job_seq = 0
    first = True
    for tmpl in spec["chains"]:
        kind = str(tmpl.get("kind", "single")).upper()
        if kind not in CHAIN_KINDS:
            raise WorkloadError(f"unknown chain kind {kind!r}")
        count = int(tmpl.get("count", 1))
        if count < 1:
            raise WorkloadError("chain count must be >= 1")
        if kind == "SINGLE":
            jdefs = [tmpl.get("job") or {}]
        else:
            jdefs = list(tmpl.get("jobs") or [])
            if len(jdefs) < 1:
                raise WorkloadError(f"{kind} chain needs a non-empty 'jobs' list")
        for _ in range(count):
            clock = next_arrival(clock, first)
            first = False
            chain_id = f"c{chain_seq:04d}"
            chain_seq += 1
            jobs = []
            for jdef in jdefs:
                job = _build_job(f"j{job_seq:05d}", chain_id, jdef, clock, profiles, resources)
                job_seq += 1
                jobs.append(job)
            if kind == "SEQUENTIAL":
                edges = [(i, i + 1) for i in range(len(jobs) - 1)]
            elif kind == "MIX":
                edges = [tuple(int(x) for x in e) for e in (tmpl.get("edges") or [])]
            else:
                edges = []
            _check_acyclic(len(jobs), edges, chain_id)
            for a, b in edges:
                jobs[b].predecessors.append(jobs[a].job_id)
            chains.append(Chain(chain_id, kind, jobs, edges))
    return chains


def assign_block_replicas(job: Job, alive_node_ids: Sequence[str],
                          rng: np.random.Generator) -> None:
    """Place input-block replicas for every map of ``job``.

    Each map gets ``min(REPLICATION_FACTOR, len(alive_node_ids))`` distinct
    preferred nodes drawn uniformly without replacement.
    """
    nodes = list(alive_node_ids)
    if not nodes:
        raise WorkloadError("cannot place replicas on an empty cluster")
    k = min(REPLICATION_FACTOR, len(nodes))
    for task in job.maps:
        picks = rng.choice(len(nodes), size=k, replace=False)
        task.preferred_nodes = tuple(nodes[i] for i in picks)


def sample_duration(job: Job, task: Task, rng: np.random.Generator,
                    slowdown: float = 1.0, local: bool = True) -> int:
    """Draw one attempt duration in ms.

    Lognormal draw per the job-type profile, multiplied by the node slowdown
    factor and, for non-local maps, by the remote-read factor.
    """
    prof = job.duration_profile
    scale = prof.map_scale_ms if task.task_type is TaskType.MAP else prof.reduce_scale_ms
    draw = scale * math.exp(prof.sigma * rng.standard_normal()) if prof.sigma > 0 else float(scale)
    factor = slowdown
    if task.task_type is TaskType.MAP and not local:
        factor *= prof.remote_read_factor
    return max(1, int(round(draw * factor)))


def load_workload_spec(path: str) -> dict:
    """Read a workload spec file (YAML or JSON by extension)."""
    import yaml

    with open(path, "r", encoding="utf-8") as fh:
        if path.endswith(".json"):
            return json.load(fh)
        return yaml.safe_load(fh)
