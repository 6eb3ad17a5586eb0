"""Per-task attribute extraction and labeled dataset handling.

One row describes one task at one scheduling instant: its identity and
priority, how it has fared so far (previous attempts, reschedules), how the
target worker node is doing (running/finished/failed attempts, free slots),
cluster-wide history, and the resources the task has consumed. Rows exported
after a run additionally carry the attempt outcome as the label.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .workload import AttemptStatus, FAILED_STATUSES, Task, TaskType

#: Column order of the dataset CSV. Frozen; the fingerprint of a trained
#: model is derived from it.
SCHEMA = (
    "job_id",
    "task_id",
    "task_type",
    "priority",
    "locality",
    "execution_type",
    "elapsed_execution_time",
    "nbr_prev_finished_attempts",
    "nbr_prev_failed_attempts",
    "nbr_reschedule_events",
    "nbr_prev_finished_tasks",
    "nbr_prev_failed_tasks",
    "tt_running_tasks",
    "tt_finished_tasks",
    "tt_failed_tasks",
    "tt_available_map_slots",
    "tt_available_reduce_slots",
    "job_total_tasks",
    "used_cpu",
    "used_mem",
    "used_hdfs_rw",
    "label",
)

#: Columns fed to models: identifiers and the label are excluded; ids exist
#: only to tie rows back to the run log.
FEATURE_COLUMNS = tuple(c for c in SCHEMA if c not in ("job_id", "task_id", "label"))

_STRING_COLUMNS = ("job_id", "task_id", "task_type", "execution_type", "label")
_FLOAT_COLUMNS = ("used_cpu", "used_mem", "used_hdfs_rw")

#: Sentinel for attributes that are undefined for a task type
#: (block locality only exists for maps).
LOCALITY_UNDEFINED = -1

_TYPE_CODE = {"MAP": 0.0, "REDUCE": 1.0}
_EXEC_CODE = {"NORMAL": 0.0, "SPECULATIVE": 1.0}
LABEL_FINISHED = "FINISHED"
LABEL_FAILED = "FAILED"
_LABEL_CODE = {LABEL_FINISHED: 0.0, LABEL_FAILED: 1.0}


@dataclass
class FeatureVector:
    job_id: str
    task_id: str
    task_type: str
    priority: int
    locality: int
    execution_type: str
    elapsed_execution_time: int
    nbr_prev_finished_attempts: int
    nbr_prev_failed_attempts: int
    nbr_reschedule_events: int
    nbr_prev_finished_tasks: int
    nbr_prev_failed_tasks: int
    tt_running_tasks: int
    tt_finished_tasks: int
    tt_failed_tasks: int
    tt_available_map_slots: int
    tt_available_reduce_slots: int
    job_total_tasks: int
    used_cpu: float
    used_mem: float
    used_hdfs_rw: float
    label: Optional[str] = None

    def numeric(self, column: str) -> float:
        """Model-facing numeric encoding of one column."""
        value = getattr(self, column)
        if column == "task_type":
            return _TYPE_CODE[value]
        if column == "execution_type":
            return _EXEC_CODE[value]
        if column == "label":
            return _LABEL_CODE[value]
        return float(value)

    def as_row(self) -> list:
        return [getattr(self, c) for c in SCHEMA]


assert tuple(f.name for f in fields(FeatureVector)) == SCHEMA


def schema_fingerprint(columns=SCHEMA) -> str:
    return hashlib.sha256(",".join(columns).encode("utf-8")).hexdigest()[:16]


def extract_features(task: Task, job, node, nbr_prev_finished_tasks: int,
                     nbr_prev_failed_tasks: int, clock: int,
                     speculative: bool = False) -> FeatureVector:
    """Snapshot every attribute of ``task`` as of ``clock``, for a candidate
    placement on ``node``. Pure read; nothing is mutated."""
    elapsed = 0
    used_ms = 0
    for att in task.attempts:
        span = (att.end if att.end is not None else clock) - att.start
        elapsed += span
        if att.planned_ms is not None:
            used_ms += att.exec_ms if att.end is not None else span
    res = job.resource_profile
    if task.task_type is TaskType.MAP:
        locality = 1 if node.node_id in task.preferred_nodes else 0
    else:
        locality = LOCALITY_UNDEFINED
    return FeatureVector(
        job_id=task.job_id,
        task_id=task.task_id,
        task_type=task.task_type.value,
        priority=job.priority,
        locality=locality,
        execution_type="SPECULATIVE" if speculative else "NORMAL",
        elapsed_execution_time=elapsed,
        nbr_prev_finished_attempts=task.finished_attempts,
        nbr_prev_failed_attempts=task.failed_attempts,
        nbr_reschedule_events=task.reschedule_events,
        nbr_prev_finished_tasks=nbr_prev_finished_tasks,
        nbr_prev_failed_tasks=nbr_prev_failed_tasks,
        tt_running_tasks=len(node.running()),
        tt_finished_tasks=node.tt_finished,
        tt_failed_tasks=node.tt_failed,
        tt_available_map_slots=node.free_slots(TaskType.MAP),
        tt_available_reduce_slots=node.free_slots(TaskType.REDUCE),
        job_total_tasks=job.total_tasks,
        used_cpu=used_ms * res.cpu,
        used_mem=used_ms * res.mem_mb,
        used_hdfs_rw=used_ms * res.hdfs_rw,
    )


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    """An ordered collection of rows conforming to SCHEMA (possibly extended
    by *_missing indicator columns added on import)."""

    rows: list[FeatureVector]
    columns: tuple = SCHEMA
    provenance: Optional[dict] = None
    #: Indicator matrix (rows x indicator columns) when imports imputed
    #: missing cells; None otherwise.
    missing_indicators: Optional[np.ndarray] = None
    indicator_columns: tuple = ()

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def feature_columns(self) -> tuple:
        return FEATURE_COLUMNS + self.indicator_columns

    def label_counts(self) -> dict[str, int]:
        counts = {LABEL_FINISHED: 0, LABEL_FAILED: 0}
        for row in self.rows:
            if row.label is not None:
                counts[row.label] += 1
        return counts

    def filter_type(self, task_type: str) -> "Dataset":
        keep = [i for i, r in enumerate(self.rows) if r.task_type == task_type]
        ind = self.missing_indicators[keep] if self.missing_indicators is not None else None
        return Dataset([self.rows[i] for i in keep], self.columns, self.provenance,
                       ind, self.indicator_columns)

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Feature matrix and 0/1 label vector (1 = FAILED)."""
        if any(r.label is None for r in self.rows):
            raise DatasetError("matrix() needs labeled rows")
        X = np.array([[r.numeric(c) for c in FEATURE_COLUMNS] for r in self.rows], dtype=float)
        if self.indicator_columns:
            X = np.hstack([X, self.missing_indicators.astype(float)])
        y = np.array([r.numeric("label") for r in self.rows], dtype=float)
        return X, y

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SCHEMA)
            for row in self.rows:
                writer.writerow(["" if v is None else v for v in row.as_row()])

    @staticmethod
    def from_csv(path: str, impute: bool = True) -> "Dataset":
        """Load a dataset CSV.

        Empty numeric cells are imputed with 0; every column that had at
        least one imputed cell gets a paired ``<name>_missing`` indicator
        column appended to the feature set. With ``impute=False`` a missing
        cell raises instead.
        """
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DatasetError(f"{path}: empty file") from None
            if tuple(header) != SCHEMA:
                raise DatasetError(f"{path}: header does not match the documented schema")
            rows: list[FeatureVector] = []
            missing_cols: dict[str, list[int]] = {}
            for line_no, raw in enumerate(reader):
                if len(raw) != len(SCHEMA):
                    raise DatasetError(f"{path}: row {line_no + 2} has {len(raw)} cells")
                values = {}
                for col, cell in zip(SCHEMA, raw):
                    if cell == "" and col != "label":
                        if not impute:
                            raise DatasetError(f"{path}: missing value in {col!r}")
                        missing_cols.setdefault(col, []).append(line_no)
                        cell = "0"
                    if col == "label":
                        values[col] = cell if cell else None
                    elif col in _STRING_COLUMNS:
                        values[col] = cell
                    elif col in _FLOAT_COLUMNS:
                        values[col] = float(cell)
                    else:
                        values[col] = int(float(cell))
                rows.append(FeatureVector(**values))
        indicators = None
        ind_cols: tuple = ()
        if missing_cols:
            ind_cols = tuple(f"{c}_missing" for c in sorted(missing_cols))
            indicators = np.zeros((len(rows), len(ind_cols)), dtype=int)
            for j, col in enumerate(sorted(missing_cols)):
                for i in missing_cols[col]:
                    indicators[i, j] = 1
        return Dataset(rows, SCHEMA, None, indicators, ind_cols)


def export_dataset(attempt_log: list[dict], task_type: Optional[str] = None,
                   provenance: Optional[dict] = None) -> Dataset:
    """Turn a run's attempt log into a labeled dataset.

    One row per terminal attempt that ran to a natural outcome: FINISHED
    stays FINISHED, FAILED and FAILED_TIMEOUT become FAILED. Attempts killed
    by speculation resolution carry no outcome of their own and are skipped.
    Features are the snapshot captured when the attempt was scheduled.
    """
    rows = []
    for rec in attempt_log:
        status = rec["status"]
        if status == AttemptStatus.FINISHED.value:
            label = LABEL_FINISHED
        elif status in tuple(s.value for s in FAILED_STATUSES):
            label = LABEL_FAILED
        else:
            continue
        feats = dict(rec["features"])
        feats["label"] = label
        fv = FeatureVector(**feats)
        if task_type is not None and fv.task_type != task_type:
            continue
        rows.append(fv)
    return Dataset(rows, SCHEMA, provenance)
