#!/usr/bin/env python3
"""What a worker death costs under heartbeat-based liveness.

Kills one node shortly after the run starts and follows the timeline: the
controller keeps believing the node is fine until the heartbeat expiry
fires, so the baseline scheduler keeps feeding it work (black-hole
attempts) that can only time out. The same scenario under the failure-aware
wrapper routes around the dead node from the moment it dies.
"""

from mrsim.atlas import AtlasScheduler
from mrsim.cluster import build_cluster
from mrsim.engine import Engine, rng_streams
from mrsim.failures import parse_plan
from mrsim.models import constant_model
from mrsim.report import build_report
from mrsim.schedulers import FifoScheduler
from mrsim.workload import generate_workload

SEED = 7
KILL_AT = 30_000

cluster_cfg = {"grid": {"racks": 2, "nodes_per_rack": 2,
                        "map_slots": 2, "reduce_slots": 1}}
workload_cfg = {"chains": [
    {"kind": "single", "job": {"type": "WORDCOUNT", "maps": 8, "reduces": 1},
     "count": 2},
]}
plan_cfg = {"entries": [{"at_ms": KILL_AT, "kind": "NODE_KILL", "node": "n000"}]}


def run(make_scheduler):
    streams = rng_streams(SEED)
    cluster = build_cluster(cluster_cfg)
    chains = generate_workload(workload_cfg, streams["workload"])
    engine = Engine(cluster, chains, parse_plan(plan_cfg), make_scheduler(),
                    SEED, horizon_ms=3 * 3600 * 1000, streams=streams)
    return engine.run()


def timeline(result, label):
    print(f"\n--- {label} ---")
    for event in result.trace:
        t = event["at"] / 60_000
        if event["kind"] == "NodeFail":
            print(f"  t={t:6.1f} min  node {event['node']} dies")
        elif event.get("action") == "node_lost":
            print(f"  t={t:6.1f} min  controller finally declares {event['node']} lost")
        elif event["kind"] == "AttemptStart" and event.get("blackhole"):
            print(f"  t={t:6.1f} min  {event['task']} sent to dead {event['node']} "
                  "(black hole)")
        elif event["kind"] == "AttemptFail" and event.get("status") == "FAILED_TIMEOUT":
            print(f"  t={t:6.1f} min  {event['task']} times out")
    report = build_report(result)
    agg = report["aggregates"]
    print(f"  => failed/timeout attempts: "
          f"{agg['attempts_failed'] + agg['attempts_timeout']}, "
          f"black holes: {agg['attempts_blackhole']}, "
          f"mean job wall-clock: {agg['mean_job_wallclock_ms'] / 60_000:.1f} min")


timeline(run(FifoScheduler), "FIFO (heartbeat-blind)")

# the wrapper with an always-succeed predictor adds exactly one behavior:
# it checks worker/data reachability before trusting the base placement
timeline(run(lambda: AtlasScheduler(FifoScheduler(), constant_model(0.0),
                                    constant_model(0.0))),
         "failure-aware wrapper")

# the default expiry is 2x the 10-minute heartbeat interval, so the blind
# window is long; shrink heartbeat.base_interval_ms in the cluster config
# (or let the wrapper's adaptive controller do it when failures spike) to
# trade detection latency against heartbeat traffic.
