"""Post-run metrics: job outcomes, job execution times, failure percentages,
resource usage, and scheduler comparison tables.

A job succeeds iff every one of its tasks has at least one finished attempt
within the attempt cap; a single exhausted task fails the whole job. A job's
execution time charges every launched attempt (finished or failed) to its
task, takes the per-task sums, and adds the slowest map chain to the slowest
reduce chain. Attempts killed as redundant speculative copies never delayed
the task, so they count toward resource usage but not execution time.

Reports serialize to canonical JSON (sorted keys, fixed float rounding) so
that identical runs compare byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import statistics
from typing import Iterable, Optional

from .workload import (AttemptStatus, Job, Task, TaskStatus,
                       TERMINAL_TASK_STATUSES)

REPORT_SCHEMA_VERSION = 1


class ReportError(ValueError):
    pass


def attempt_succeeded(att) -> int:
    """1 iff the attempt ran to completion; killed copies count as 0."""
    return 1 if att.status is AttemptStatus.FINISHED else 0


def _require_terminal(job: Job) -> None:
    for task in job.tasks:
        if task.status not in TERMINAL_TASK_STATUSES:
            raise ReportError(
                f"job {job.job_id}: task {task.task_id} is {task.status.value}; "
                "outcome is only defined after the run")


def job_outcome(job: Job) -> int:
    """Success indicator for a finished run of ``job``.

    Per task the attempt successes are summed; the per-task sums are
    multiplied across all maps and all reduces; the job succeeded iff that
    product is at least 1 (the sum can exceed 1 when redundant copies both
    finish, so the product is clamped to an indicator).
    """
    _require_terminal(job)
    product = 1
    for task in job.tasks:
        product *= sum(attempt_succeeded(a) for a in task.attempts)
        if product == 0:
            return 0
    return 1 if product >= 1 else 0


def task_time_ms(task: Task) -> int:
    """Sum of wall durations of every launched attempt, excluding copies
    that were killed as redundant."""
    return sum(a.duration_ms for a in task.attempts
               if a.status is not AttemptStatus.KILLED)


def job_execution_time(job: Job) -> int:
    """max over maps + max over reduces of the per-task attempt-time sums."""
    _require_terminal(job)
    map_term = max((task_time_ms(t) for t in job.maps), default=0)
    reduce_term = max((task_time_ms(t) for t in job.reduces), default=0)
    return map_term + reduce_term


def job_wallclock_ms(job: Job) -> int:
    """Last terminal attempt end minus submission; 0 if nothing ever ran."""
    last_end = max((a.end for t in job.tasks for a in t.attempts
                    if a.end is not None), default=job.submit_ms)
    return max(0, last_end - job.submit_ms)


def _round6(x: float) -> float:
    return round(float(x), 6)


def _frac(num: int, den: int) -> float:
    return _round6(num / den) if den else 0.0


def build_report(result) -> dict:
    """Assemble the canonical report mapping from a finished run."""
    jobs_out = []
    total_tasks = finished_tasks = failed_tasks = killed_tasks = 0
    exec_times = []
    wallclocks = []
    for job in sorted(result.jobs, key=lambda j: j.job_id):
        t_fin = sum(1 for t in job.tasks if t.status is TaskStatus.FINISHED)
        t_fail = sum(1 for t in job.tasks if t.status is TaskStatus.FAILED)
        t_kill = sum(1 for t in job.tasks if t.status is TaskStatus.KILLED)
        finished_tasks += t_fin
        failed_tasks += t_fail
        killed_tasks += t_kill
        total_tasks += job.total_tasks
        exec_ms = job_execution_time(job)
        wall_ms = job_wallclock_ms(job)
        exec_times.append(exec_ms)
        wallclocks.append(wall_ms)
        jobs_out.append({
            "job_id": job.job_id,
            "chain_id": job.chain_id,
            "job_type": job.job_type,
            "status": job.status.value,
            "outcome": job_outcome(job),
            "exec_time_ms": exec_ms,
            "wallclock_ms": wall_ms,
            "submit_ms": job.submit_ms,
            "num_maps": job.num_maps,
            "num_reduces": job.num_reduces,
            "tasks_finished": t_fin,
            "tasks_failed": t_fail,
            "tasks_killed": t_kill,
        })

    total_jobs = len(jobs_out)
    failed_jobs = sum(1 for j in jobs_out if j["outcome"] == 0)

    cpu_ms = mem_ms = hdfs_ms = 0.0
    att_counts = {s: 0 for s in AttemptStatus}
    speculative = 0
    for job in result.jobs:
        res = job.resource_profile
        for task in job.tasks:
            for att in task.attempts:
                att_counts[att.status] += 1
                if att.speculative:
                    speculative += 1
                cpu_ms += att.exec_ms * res.cpu
                mem_ms += att.exec_ms * res.mem_mb
                hdfs_ms += att.exec_ms * res.hdfs_rw

    stats = result.stats
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scheduler": result.scheduler_name,
        "seed": result.seed,
        "horizon_ms": result.horizon_ms,
        "clock_end_ms": result.clock_end_ms,
        "config": result.config_echo,
        "jobs": jobs_out,
        "aggregates": {
            "total_jobs": total_jobs,
            "finished_jobs": total_jobs - failed_jobs,
            "failed_jobs": failed_jobs,
            "failed_job_fraction": _frac(failed_jobs, total_jobs),
            "total_tasks": total_tasks,
            "finished_tasks": finished_tasks,
            "failed_tasks": failed_tasks,
            "killed_tasks": killed_tasks,
            "failed_task_fraction": _frac(failed_tasks, total_tasks),
            "mean_job_exec_ms": _round6(statistics.fmean(exec_times)) if exec_times else 0.0,
            "median_job_exec_ms": _round6(statistics.median(exec_times)) if exec_times else 0.0,
            "mean_job_wallclock_ms": _round6(statistics.fmean(wallclocks)) if wallclocks else 0.0,
            "median_job_wallclock_ms": _round6(statistics.median(wallclocks)) if wallclocks else 0.0,
            "attempts_total": sum(att_counts.values()),
            "attempts_finished": att_counts[AttemptStatus.FINISHED],
            "attempts_failed": att_counts[AttemptStatus.FAILED],
            "attempts_timeout": att_counts[AttemptStatus.FAILED_TIMEOUT],
            "attempts_killed": att_counts[AttemptStatus.KILLED],
            "attempts_speculative": speculative,
            "attempts_blackhole": stats.blackhole_attempts,
            "node_dead_errors": stats.node_dead_errors,
            "penalties_applied": stats.penalties_applied,
            "truncated_jobs": stats.truncated_jobs,
        },
        "resources": {
            "cpu_ms": _round6(cpu_ms),
            "mem_mb_ms": _round6(mem_ms),
            "hdfs_rw_ms": _round6(hdfs_ms),
        },
        "predictor": _predictor_block(result),
    }
    return report


def _predictor_block(result) -> Optional[dict]:
    stats = result.stats
    if not stats.prediction_deployed:
        return None
    from .models import EvalMetrics

    m = EvalMetrics(tp=stats.pred_tp, tn=stats.pred_tn, fp=stats.pred_fp, fn=stats.pred_fn)
    block = m.as_dict()
    block["accuracy"] = _round6(block["accuracy"])
    block["precision"] = _round6(block["precision"])
    block["recall"] = _round6(block["recall"])
    block["error"] = _round6(block["error"])
    block["heartbeat_final_interval_ms"] = stats.heartbeat_final_interval_ms
    block["heartbeat_min_interval_seen_ms"] = stats.heartbeat_min_interval_seen_ms
    return block


def canonical_json(obj) -> str:
    """Deterministic serialization: sorted keys, no float surprises."""
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=True) + "\n"


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(report))


def load_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def scenario_digest(cluster_cfg, workload_cfg, plan_cfg, horizon_ms: int) -> str:
    blob = canonical_json({
        "cluster": cluster_cfg,
        "workload": workload_cfg,
        "failure_plan": plan_cfg,
        "horizon_ms": horizon_ms,
    })
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Cross-run comparison
# ---------------------------------------------------------------------------

#: Metrics carried into the comparison table, in column order.
COMPARE_METRICS = (
    "failed_jobs_pct",
    "failed_tasks_pct",
    "mean_job_exec_ms",
    "mean_job_wallclock_ms",
    "attempts_failed",
    "cpu_ms",
    "mem_mb_ms",
    "hdfs_rw_ms",
)

COMPARE_COLUMNS = ("scheduler", "runs") + COMPARE_METRICS + tuple(
    f"delta_{m}" for m in COMPARE_METRICS)


def _report_metrics(report: dict) -> dict:
    agg = report["aggregates"]
    res = report["resources"]
    return {
        "failed_jobs_pct": agg["failed_job_fraction"] * 100.0,
        "failed_tasks_pct": agg["failed_task_fraction"] * 100.0,
        "mean_job_exec_ms": agg["mean_job_exec_ms"],
        "mean_job_wallclock_ms": agg["mean_job_wallclock_ms"],
        "attempts_failed": agg["attempts_failed"] + agg["attempts_timeout"],
        "cpu_ms": res["cpu_ms"],
        "mem_mb_ms": res["mem_mb_ms"],
        "hdfs_rw_ms": res["hdfs_rw_ms"],
    }


def aggregate(reports: Iterable[dict]) -> dict:
    """Average per-scheduler metrics over seeds and compute relative deltas
    against the first scheduler. All reports must share one scenario and the
    same seed set per scheduler."""
    reports = list(reports)
    if not reports:
        raise ReportError("no reports to aggregate")
    digests = {r["config"].get("scenario_digest") for r in reports}
    if len(digests) != 1:
        raise ReportError(f"reports span different scenarios: {sorted(digests)}")

    by_sched: dict[str, list[dict]] = {}
    for rep in reports:
        by_sched.setdefault(rep["scheduler"], []).append(rep)
    seed_sets = {name: sorted(r["seed"] for r in reps) for name, reps in by_sched.items()}
    if len({tuple(v) for v in seed_sets.values()}) != 1:
        raise ReportError(f"schedulers were run on different seed sets: {seed_sets}")

    rows = []
    baseline_name = next(iter(by_sched))
    baseline_means: dict[str, float] = {}
    for name, reps in by_sched.items():
        means = {}
        for metric in COMPARE_METRICS:
            means[metric] = _round6(statistics.fmean(_report_metrics(r)[metric] for r in reps))
        if name == baseline_name:
            baseline_means = means
        row = {"scheduler": name, "runs": len(reps)}
        row.update(means)
        for metric in COMPARE_METRICS:
            base = baseline_means[metric]
            delta = 100.0 * (means[metric] - base) / base if base else 0.0
            row[f"delta_{metric}"] = _round6(delta)
        rows.append(row)

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "baseline": baseline_name,
        "seeds": seed_sets[baseline_name],
        "scenario_digest": next(iter(digests)),
        "columns": list(COMPARE_COLUMNS),
        "rows": rows,
    }


def write_comparison_csv(table: dict, path: str) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARE_COLUMNS)
        for row in table["rows"]:
            writer.writerow([row[c] for c in COMPARE_COLUMNS])
