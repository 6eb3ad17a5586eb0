"""Failure-aware wrapper: pass-through, prediction-driven redundancy,
penalties, and heartbeat adaptation."""

import json

import pytest

from conftest import FIXED_PROFILES, make_cluster_cfg, make_engine
from mrsim.atlas import AtlasConfig, AtlasScheduler
from mrsim.cluster import HeartbeatConfig
from mrsim.models import constant_model
from mrsim.report import build_report, job_execution_time
from mrsim.schedulers import FifoScheduler
from mrsim.workload import AttemptStatus, JobStatus, TaskStatus


def atlas_factory(p_fail=0.0, **cfg):
    def make():
        return AtlasScheduler(FifoScheduler(), constant_model(p_fail),
                              constant_model(p_fail), AtlasConfig(**cfg))
    return make


def wl_mixed(count=3):
    return {"chains": [{"kind": "single",
                        "job": {"type": "WORDCOUNT", "maps": 5, "reduces": 2},
                        "count": count}],
            "arrival": {"kind": "poisson", "mean_interarrival_ms": 45_000}}


class TestPassThrough:
    def test_trace_identical_to_bare_fifo(self):
        for seed in (1, 2, 3, 4, 5):
            traces = []
            for factory in (FifoScheduler, atlas_factory(0.0)):
                eng = make_engine(workload_cfg=wl_mixed(), scheduler=factory(),
                                  seed=seed)
                result = eng.run()
                traces.append([json.dumps(e, sort_keys=True) for e in result.trace])
            assert traces[0] == traces[1], f"seed {seed}"

    def test_assignment_to_same_nodes(self):
        eng = make_engine(workload_cfg=wl_mixed(1), scheduler=atlas_factory(0.0)())
        result = eng.run()
        bare = make_engine(workload_cfg=wl_mixed(1), scheduler=FifoScheduler())
        bare_result = bare.run()
        pick = lambda r: [(e["task"], e["node"]) for e in r.trace
                          if e["kind"] == "AttemptStart"]
        assert pick(result) == pick(bare_result)


class TestAvailabilityCheck:
    def test_no_dead_node_assignments(self):
        plan = {"entries": [{"at_ms": 50_000, "kind": "NODE_KILL", "node": "n001"}],
                "attempt_fail_prob": 0.1}
        eng = make_engine(workload_cfg=wl_mixed(4), plan_cfg=plan,
                          scheduler=atlas_factory(0.0)(), seed=11)
        result = eng.run()
        assert result.stats.node_dead_errors == 0
        assert result.stats.blackhole_attempts == 0
        starts_on_dead = [e for e in result.trace if e["kind"] == "AttemptStart"
                          and e["node"] == "n001" and e["at"] > 50_000]
        assert starts_on_dead == []

    def test_baseline_does_hit_dead_nodes(self):
        plan = {"entries": [{"at_ms": 50_000, "kind": "NODE_KILL", "node": "n001"}],
                "attempt_fail_prob": 0.1}
        eng = make_engine(workload_cfg=wl_mixed(4), plan_cfg=plan,
                          scheduler=FifoScheduler(), seed=11)
        result = eng.run()
        assert result.stats.node_dead_errors > 0

    def test_unreachable_everything_waits_then_penalizes(self):
        # single node cluster killed before the job arrives: the only
        # placement is unreachable, so the task waits a full timeout and is
        # requeued with a penalty until the node comes back
        wl = {"chains": [{"kind": "single", "job": {"maps": 1, "reduces": 0}}],
              "arrival": {"kind": "fixed", "start_ms": 60_000},
              "profiles": FIXED_PROFILES}
        plan = {"entries": [
            {"at_ms": 30_000, "kind": "NODE_KILL", "node": "n000"},
            {"at_ms": 800_000, "kind": "NODE_RECOVER", "node": "n000"},
        ]}
        eng = make_engine(cluster_cfg=make_cluster_cfg(nodes=1, racks=1),
                          workload_cfg=wl, plan_cfg=plan,
                          scheduler=atlas_factory(0.0)(),
                          horizon_ms=4 * 3600 * 1000)
        result = eng.run()
        task = eng.jobs[0].maps[0]
        assert result.stats.penalties_applied == 1  # one expired wait round
        assert task.penalty == 1
        assert task.status is TaskStatus.FINISHED  # ran after recovery
        assert task.attempts[0].start >= 800_000


class TestSpeculativeMultiLaunch:
    def test_fail_pred_launches_two_distinct_copies(self):
        wl = {"chains": [{"kind": "single", "job": {"maps": 2, "reduces": 0}}],
              "profiles": FIXED_PROFILES}
        eng = make_engine(workload_cfg=wl, scheduler=atlas_factory(1.0)())
        result = eng.run()
        for task in eng.jobs[0].maps:
            assert task.status is TaskStatus.FINISHED
            launched = [a for a in task.attempts if a.speculative]
            assert len(launched) == 2
            assert len({a.node_id for a in launched}) == 2
            statuses = sorted(a.status.value for a in launched)
            assert statuses == ["FINISHED", "KILLED"]  # first copy wins

    def test_winner_takes_task_and_killed_copy_excluded_from_time(self):
        wl = {"chains": [{"kind": "single", "job": {"maps": 1, "reduces": 0}}],
              "profiles": FIXED_PROFILES}
        eng = make_engine(workload_cfg=wl, scheduler=atlas_factory(1.0)())
        eng.run()
        job = eng.jobs[0]
        task = job.maps[0]
        winner = [a for a in task.attempts if a.status is AttemptStatus.FINISHED][0]
        assert job_execution_time(job) == winner.duration_ms
        report = build_report(eng.run_until())
        assert report["resources"]["cpu_ms"] > winner.exec_ms * 0.99  # loser counted

    def test_both_copies_failing_costs_one_penalty(self):
        wl = {"chains": [{"kind": "single", "job": {"maps": 1, "reduces": 0}}],
              "profiles": FIXED_PROFILES}
        eng = make_engine(workload_cfg=wl, plan_cfg={"attempt_fail_prob": 1.0},
                          scheduler=atlas_factory(1.0)())
        eng.run()
        task = eng.jobs[0].maps[0]
        # two rounds of two copies exhaust K=4; one penalty per failed round
        assert len(task.attempts) == 4
        assert task.status is TaskStatus.FAILED
        assert task.penalty == 2
        assert eng.stats.penalties_applied == 2

    def test_fanout_never_exceeded(self):
        plan = {"attempt_fail_prob": 0.3}
        eng = make_engine(workload_cfg=wl_mixed(3), plan_cfg=plan,
                          scheduler=atlas_factory(1.0)(), seed=13)
        result = eng.run()
        live = {}
        for event in result.trace:
            if event["kind"] == "AttemptStart":
                live[event["task"]] = live.get(event["task"], 0) + 1
                assert live[event["task"]] <= 2
            elif event["kind"] in ("AttemptFinish", "AttemptFail") and "task" in event:
                live[event["task"]] = live.get(event["task"], 0) - 1

    def test_insufficient_distinct_nodes_waits(self):
        # a 1-node cluster can never host 2 distinct copies: the predicted-to-
        # fail task stays waiting (penalized over time) and never launches
        wl = {"chains": [{"kind": "single", "job": {"maps": 1, "reduces": 0}}],
              "profiles": FIXED_PROFILES}
        eng = make_engine(cluster_cfg=make_cluster_cfg(nodes=1, racks=1),
                          workload_cfg=wl, scheduler=atlas_factory(1.0)(),
                          horizon_ms=3_600_000)
        eng.run()
        task = eng.jobs[0].maps[0]
        assert task.attempts == []
        assert task.penalty >= 1
        assert eng.jobs[0].status is JobStatus.FAILED  # truncated at horizon


class TestTimeoutPenalty:
    def test_timed_out_attempt_requeues_with_penalty(self):
        wl = {"chains": [{"kind": "single", "job": {"maps": 1, "reduces": 0}}],
              "profiles": FIXED_PROFILES}
        eng = make_engine(workload_cfg=wl, scheduler=atlas_factory(0.0)())
        eng._bootstrap()
        task = eng.jobs[0].maps[0]
        att = eng.start_attempt(task, "n000")
        eng.clock = 600_001
        eng.enforce_timeout(task, att)
        assert att.status is AttemptStatus.FAILED_TIMEOUT
        assert task.status is TaskStatus.PENDING
        assert task.penalty == 1  # the wrapper charges the failed round


class TestDeployedPredictionStats:
    def test_report_carries_confusion_counts(self):
        plan = {"attempt_fail_prob": 0.3}
        eng = make_engine(workload_cfg=wl_mixed(2), plan_cfg=plan,
                          scheduler=atlas_factory(0.0)(), seed=31)
        report = build_report(eng.run())
        block = report["predictor"]
        assert block is not None
        scored = block["tp"] + block["tn"] + block["fp"] + block["fn"]
        agg = report["aggregates"]
        natural = (agg["attempts_finished"] + agg["attempts_failed"]
                   + agg["attempts_timeout"])
        assert scored == natural  # every deployed prediction is scored
        assert block["accuracy"] + block["error"] == pytest.approx(1.0)
        assert block["heartbeat_final_interval_ms"] == 600_000

    def test_baseline_report_has_no_predictor_block(self):
        eng = make_engine(workload_cfg=wl_mixed(1), scheduler=FifoScheduler())
        report = build_report(eng.run())
        assert report["predictor"] is None


class TestPenaltyOrdering:
    def test_lower_penalty_scheduled_first(self):
        wl = {"chains": [{"kind": "single", "job": {"maps": 1, "reduces": 0},
                          "count": 2}],
              "profiles": FIXED_PROFILES}
        eng = make_engine(cluster_cfg=make_cluster_cfg(nodes=1, racks=1, map_slots=1),
                          workload_cfg=wl, scheduler=atlas_factory(0.0)())
        eng._bootstrap()
        first, second = eng.jobs[0].maps[0], eng.jobs[1].maps[0]
        first.penalty = 2  # penalized task loses its queue position
        decision = eng.scheduler.decide(eng)
        assert decision.task is second


class TestHeartbeatAdaptation:
    def test_halving_and_floor(self):
        hb = HeartbeatConfig()
        assert hb.current_interval_ms == 600_000
        assert hb.adapt(0.4) == 300_000           # > 1/3 failed: halve
        assert hb.adapt(0.5) == 150_000
        assert hb.adapt(0.9) == 120_000           # clamped at the floor
        assert hb.adapt(0.9) == 120_000

    def test_growth_capped_at_base(self):
        hb = HeartbeatConfig(current_interval_ms=300_000)
        assert hb.adapt(0.0) == 450_000           # calm: grow 1.5x
        assert hb.adapt(0.0) == 600_000           # capped at base
        assert hb.adapt(1.0 / 3.0) == 600_000     # exactly 1/3 is not "more"

    def test_bounds_invariant(self):
        hb = HeartbeatConfig()
        import numpy as np
        rng = np.random.default_rng(3)
        for _ in range(200):
            hb.adapt(float(rng.random()))
            assert hb.min_interval_ms <= hb.current_interval_ms <= hb.base_interval_ms

    def test_engine_level_adaptation(self):
        # 2 of 3 nodes die within the first controller cycle: > 1/3 failed,
        # so the next cycle runs at half the interval
        wl = {"chains": [{"kind": "single", "job": {"maps": 2, "reduces": 0}}],
              "profiles": FIXED_PROFILES}
        plan = {"entries": [
            {"at_ms": 100_000, "kind": "NODE_KILL", "node": "n001"},
            {"at_ms": 200_000, "kind": "NODE_KILL", "node": "n002"},
        ]}
        eng = make_engine(cluster_cfg=make_cluster_cfg(nodes=3, racks=1),
                          workload_cfg=wl, plan_cfg=plan,
                          scheduler=atlas_factory(0.0)(),
                          horizon_ms=3_600_000)
        result = eng.run()
        assert result.stats.heartbeat_min_interval_seen_ms == 300_000
        cycles = [e for e in result.trace if e.get("who") == "jobtracker"]
        assert cycles[0]["interval_ms"] == 300_000
        assert cycles[0]["failed_fraction"] == pytest.approx(2 / 3)
        # a calm stretch grows the interval back toward the base
        assert cycles[-1]["interval_ms"] > 300_000

    def test_baseline_never_adapts(self):
        plan = {"entries": [
            {"at_ms": 100_000, "kind": "NODE_KILL", "node": "n001"},
            {"at_ms": 200_000, "kind": "NODE_KILL", "node": "n002"},
        ]}
        eng = make_engine(cluster_cfg=make_cluster_cfg(nodes=3, racks=1),
                          workload_cfg={"chains": []}, plan_cfg=plan,
                          scheduler=FifoScheduler(), horizon_ms=3_600_000)
        result = eng.run()
        assert result.stats.heartbeat_min_interval_seen_ms == 600_000
