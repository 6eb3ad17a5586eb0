"""Job outcome and execution-time formulas, checked against brute force."""

import itertools

import pytest

from conftest import make_job, set_attempts
from mrsim.report import (ReportError, aggregate, job_execution_time,
                          job_outcome, job_wallclock_ms, task_time_ms)
from mrsim.workload import AttemptStatus, TaskStatus


def formula_outcome(job) -> int:
    """Literal product-of-attempt-sums evaluation, clamped to an indicator."""
    product = 1
    for task in job.maps + job.reduces:
        product *= sum(1 if a.status is AttemptStatus.FINISHED else 0
                       for a in task.attempts)
    return 1 if product >= 1 else 0


def recount_time_from_records(job) -> int:
    """Independent recomputation from serialized attempt records."""
    sums = {}
    for task in job.maps + job.reduces:
        total = 0
        for rec in (a.to_record() for a in task.attempts):
            if rec["status"] == "KILLED":
                continue
            total += rec["end"] - rec["start"]
        sums[task.task_id] = total
    map_part = max((sums[t.task_id] for t in job.maps), default=0)
    reduce_part = max((sums[t.task_id] for t in job.reduces), default=0)
    return map_part + reduce_part


class TestJobOutcome:
    def test_all_first_attempts_finish(self):
        job = make_job(num_maps=2, num_reduces=1)
        for task in job.tasks:
            set_attempts(task, [(60_000, "FINISHED")])
        assert job_outcome(job) == 1

    def test_one_exhausted_map_fails_the_job(self):
        job = make_job(num_maps=3, num_reduces=1)
        for task in job.tasks:
            set_attempts(task, [(60_000, "FINISHED")])
        set_attempts(job.maps[1], [(60_000, "FAILED")] * 4)
        assert job_outcome(job) == 0

    def test_killed_attempts_count_as_not_finished(self):
        job = make_job(num_maps=1, num_reduces=0)
        set_attempts(job.maps[0], [(60_000, "KILLED")])
        assert job_outcome(job) == 0

    def test_zero_reduce_job(self):
        job = make_job(num_maps=2, num_reduces=0, job_type="TERAGEN")
        for task in job.maps:
            set_attempts(task, [(45_000, "FINISHED")])
        assert job_outcome(job) == 1

    def test_requires_terminal_tasks(self):
        job = make_job(num_maps=1)
        job.maps[0].status = TaskStatus.RUNNING
        with pytest.raises(ReportError):
            job_outcome(job)
        with pytest.raises(ReportError):
            job_execution_time(job)

    def test_exhaustive_vs_formula(self):
        """Every status combination for 3 maps x 2 reduces x 1..2 attempts."""
        per_task = []
        for n_att in (1, 2):
            for combo in itertools.product(("FINISHED", "FAILED"), repeat=n_att):
                per_task.append(combo)
        assert len(per_task) == 6
        cases = 0
        for combo in itertools.product(per_task, repeat=5):
            job = make_job(num_maps=3, num_reduces=2)
            for task, statuses in zip(job.tasks, combo):
                set_attempts(task, [(1000, s) for s in statuses])
            assert job_outcome(job) == formula_outcome(job)
            cases += 1
        assert cases == 6 ** 5


class TestJobExecutionTime:
    def test_single_attempts(self):
        job = make_job(num_maps=1, num_reduces=1)
        set_attempts(job.maps[0], [(60_000, "FINISHED")])
        set_attempts(job.reduces[0], [(120_000, "FINISHED")], t0=60_000)
        assert job_execution_time(job) == 180_000

    def test_failed_attempts_add_up(self):
        job = make_job(num_maps=1, num_reduces=0)
        set_attempts(job.maps[0], [(60_000, "FAILED"), (60_000, "FINISHED")])
        assert job_execution_time(job) == 120_000

    def test_killed_copies_do_not_add_time(self):
        job = make_job(num_maps=1, num_reduces=0)
        set_attempts(job.maps[0], [(60_000, "FINISHED"), (30_000, "KILLED")])
        assert job_execution_time(job) == 60_000
        assert task_time_ms(job.maps[0]) == 60_000

    def test_random_jobs_match_recount(self, rng):
        statuses = ["FINISHED", "FAILED", "FAILED_TIMEOUT", "KILLED"]
        for _ in range(1000):
            n_maps = int(rng.integers(1, 5))
            n_reduces = int(rng.integers(0, 4))
            job = make_job(num_maps=n_maps, num_reduces=n_reduces)
            ok = True
            for task in job.tasks:
                n_att = int(rng.integers(1, 5))
                specs = []
                for k in range(n_att):
                    dur = int(rng.integers(1, 400_000))
                    if k == n_att - 1 and ok:
                        specs.append((dur, "FINISHED"))
                    else:
                        specs.append((dur, statuses[int(rng.integers(0, 4))]))
                set_attempts(task, specs)
            assert job_execution_time(job) == recount_time_from_records(job)

    def test_wallclock_includes_queue_delay(self):
        job = make_job(num_maps=1, num_reduces=0, submit_ms=10_000)
        set_attempts(job.maps[0], [(60_000, "FINISHED")], t0=50_000)
        assert job_wallclock_ms(job) == 100_000
        assert job_execution_time(job) == 60_000


class TestAggregate:
    def _fake_report(self, scheduler, seed, failed_frac=0.1):
        return {
            "scheduler": scheduler,
            "seed": seed,
            "config": {"scenario_digest": "abc"},
            "aggregates": {
                "failed_job_fraction": failed_frac,
                "failed_task_fraction": failed_frac / 2,
                "mean_job_exec_ms": 1000.0,
                "mean_job_wallclock_ms": 2000.0,
                "attempts_failed": 5,
                "attempts_timeout": 1,
            },
            "resources": {"cpu_ms": 10.0, "mem_mb_ms": 20.0, "hdfs_rw_ms": 30.0},
        }

    def test_self_comparison_has_zero_deltas(self):
        table = aggregate([self._fake_report("fifo", 1)])
        row = table["rows"][0]
        assert row["scheduler"] == "fifo"
        for key, value in row.items():
            if key.startswith("delta_"):
                assert value == 0.0

    def test_mismatched_scenarios_rejected(self):
        r1 = self._fake_report("fifo", 1)
        r2 = self._fake_report("fair", 1)
        r2["config"]["scenario_digest"] = "other"
        with pytest.raises(ReportError):
            aggregate([r1, r2])

    def test_mismatched_seed_sets_rejected(self):
        r1 = self._fake_report("fifo", 1)
        r2 = self._fake_report("fair", 2)
        with pytest.raises(ReportError):
            aggregate([r1, r2])

    def test_delta_direction(self):
        base = self._fake_report("fifo", 1, failed_frac=0.2)
        other = self._fake_report("atlas", 1, failed_frac=0.1)
        table = aggregate([base, other])
        atlas_row = [r for r in table["rows"] if r["scheduler"] == "atlas"][0]
        assert atlas_row["delta_failed_tasks_pct"] == pytest.approx(-50.0)
