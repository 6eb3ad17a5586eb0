"""Shared builders for simulation tests."""

from __future__ import annotations

import numpy as np
import pytest

from mrsim.cluster import build_cluster
from mrsim.engine import Engine, rng_streams
from mrsim.failures import parse_plan
from mrsim.schedulers import FifoScheduler
from mrsim.workload import (AttemptStatus, DEFAULT_DURATION_PROFILES,
                            DEFAULT_RESOURCE_PROFILES, DurationProfile, Job,
                            ResourceProfile, Task, TaskAttempt, TaskStatus,
                            TaskType, generate_workload)

#: Deterministic duration profiles (sigma=0) for scripted scenarios.
FIXED_PROFILES = {
    "WORDCOUNT": {"sigma": 0.0},
    "TERAGEN": {"sigma": 0.0},
    "TERASORT": {"sigma": 0.0},
}


def make_cluster_cfg(nodes=4, racks=2, map_slots=2, reduce_slots=1, **extra) -> dict:
    per = max(1, nodes // racks)
    cfg = {"grid": {"racks": racks, "nodes_per_rack": per,
                    "map_slots": map_slots, "reduce_slots": reduce_slots}}
    cfg.update(extra)
    return cfg


def make_engine(cluster_cfg=None, workload_cfg=None, plan_cfg=None,
                scheduler=None, seed=1, horizon_ms=4 * 3600 * 1000,
                collect_trace=True) -> Engine:
    cluster_cfg = cluster_cfg or make_cluster_cfg()
    workload_cfg = workload_cfg or {"chains": []}
    streams = rng_streams(seed)
    cluster = build_cluster(cluster_cfg)
    chains = generate_workload(workload_cfg, streams["workload"])
    return Engine(cluster, chains, parse_plan(plan_cfg),
                  scheduler or FifoScheduler(), seed, horizon_ms,
                  streams=streams, collect_trace=collect_trace)


def make_job(num_maps=1, num_reduces=0, job_id="j00000", job_type="WORDCOUNT",
             submit_ms=0, priority=0) -> Job:
    job = Job(
        job_id=job_id, job_type=job_type, priority=priority,
        num_maps=num_maps, num_reduces=num_reduces, submit_ms=submit_ms,
        chain_id="c0000",
        duration_profile=DurationProfile(**vars(DEFAULT_DURATION_PROFILES[job_type])),
        resource_profile=ResourceProfile(**vars(DEFAULT_RESOURCE_PROFILES[job_type])),
    )
    job.maps = [Task(f"{job_id}-m{i}", job_id, TaskType.MAP, seq=i)
                for i in range(num_maps)]
    job.reduces = [Task(f"{job_id}-r{i}", job_id, TaskType.REDUCE, seq=num_maps + i)
                   for i in range(num_reduces)]
    return job


def set_attempts(task: Task, specs, node_id="n000", t0=0) -> None:
    """Fill an attempt history: specs is a list of (duration_ms, status).

    Attempts run back to back starting at t0; the task status follows the
    outcomes (FINISHED beats everything, otherwise FAILED).
    """
    clock = t0
    task.attempts = []
    for i, (dur, status) in enumerate(specs):
        status = AttemptStatus(status)
        att = TaskAttempt(attempt_id=i, task_id=task.task_id, node_id=node_id,
                          start=clock, end=clock + dur, status=status,
                          planned_ms=dur, exec_ms=dur)
        task.attempts.append(att)
        clock += dur
    if any(a.status is AttemptStatus.FINISHED for a in task.attempts):
        task.status = TaskStatus.FINISHED
    elif task.attempts:
        task.status = TaskStatus.FAILED
    else:
        task.status = TaskStatus.KILLED


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
