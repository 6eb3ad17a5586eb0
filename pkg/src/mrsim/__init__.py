"""mrsim: deterministic MapReduce cluster simulator with pluggable
schedulers and a failure-aware scheduling wrapper."""

from .atlas import AtlasConfig, AtlasScheduler
from .cluster import Cluster, HeartbeatConfig, Node, NodeState, build_cluster, load_cluster
from .config import ConfigError, RunConfig, build_engine, load_run_config, run_simulation
from .engine import Engine, EventKind, RunResult, SimStats, rng_streams
from .failures import FailureEntry, FailurePlan, attempt_outcome, compile_plan, load_plan, parse_plan
from .features import Dataset, FeatureVector, SCHEMA, export_dataset, extract_features
from .models import (CVResult, EvalMetrics, PredictiveModel, confusion, constant_model,
                     cross_validate, load_model, save_model, train)
from .report import (aggregate, build_report, canonical_json, job_execution_time,
                     job_outcome, job_wallclock_ms, write_report)
from .schedulers import (Assign, CapacityConfig, CapacityScheduler, FairConfig,
                         FairScheduler, FifoScheduler, Requeue, SpeculationConfig,
                         SpeculativeAssign, WAIT, Wait)
from .workload import (AttemptStatus, Chain, Job, JobStatus, Task, TaskAttempt,
                       TaskStatus, TaskType, assign_block_replicas, generate_workload,
                       load_workload_spec, sample_duration)

__version__ = "0.1.0"
