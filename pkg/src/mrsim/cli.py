"""Command-line pipeline: run simulations, export datasets, train and
evaluate predictors, and compare schedulers.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import models
from .config import ConfigError, load_run_config, run_matrix, run_simulation
from .features import Dataset, export_dataset
from .report import aggregate, canonical_json, write_comparison_csv, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _write_jsonl(records: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {"seed": args.seed, "scheduler": args.scheduler}
    cfg = load_run_config(args.config, overrides)
    result, report = run_simulation(
        cfg, collect_trace=True, collect_decisions=bool(args.decisions))
    write_report(report, args.out)
    if args.trace:
        _write_jsonl(result.trace, args.trace)
    if args.attempts:
        _write_jsonl(result.attempt_log, args.attempts)
    if args.decisions:
        _write_jsonl(result.decision_log, args.decisions)
    agg = report["aggregates"]
    print(f"scheduler={report['scheduler']} seed={report['seed']} "
          f"jobs={agg['total_jobs']} failed_jobs={agg['failed_jobs']} "
          f"tasks={agg['total_tasks']} failed_tasks={agg['failed_tasks']} "
          f"report={args.out}")
    return EXIT_OK


def cmd_export_dataset(args: argparse.Namespace) -> int:
    records = []
    try:
        with open(args.attempt_log, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"attempt log: cannot read {args.attempt_log}: {exc}") from exc
    dataset = export_dataset(records, task_type=args.type)
    dataset.to_csv(args.out)
    counts = dataset.label_counts()
    print(f"rows={len(dataset)} finished={counts['FINISHED']} "
          f"failed={counts['FAILED']} csv={args.out}")
    return EXIT_OK


def _train_one_type(dataset: Dataset, task_type: str, kinds: list[str],
                    seed: int) -> tuple[models.PredictiveModel, dict]:
    sub = dataset.filter_type(task_type)
    if len(sub) < 10:
        raise ConfigError(f"insufficient rows for 10-fold cross validation: "
                          f"{len(sub)} {task_type} rows")
    counts = sub.label_counts()
    if counts["FINISHED"] == 0 or counts["FAILED"] == 0:
        raise ConfigError(f"{task_type} rows contain a single outcome class; "
                          "cannot train")
    cv_blocks = []
    best = None
    for kind in kinds:
        cv = models.cross_validate(sub, kind, rng=np.random.default_rng(seed))
        cv_blocks.append(cv.as_dict())
        mean_acc = cv.mean()["accuracy"]
        if best is None or mean_acc > best[0]:
            best = (mean_acc, kind)
    chosen = best[1]
    model = models.train(sub, chosen, rng=np.random.default_rng(seed))
    cv_report = {
        "task_type": task_type,
        "rows": len(sub),
        "labels": counts,
        "evaluated": cv_blocks,
        "selected_kind": chosen,
        "selected_mean_accuracy": best[0],
    }
    return model, cv_report


def cmd_train(args: argparse.Namespace) -> int:
    dataset = Dataset.from_csv(args.dataset)
    kinds = [k.strip() for k in args.kind.split(",")] if not args.select_best \
        else ["tree", "forest", "glm"]
    out_paths = {}
    cv_blocks = {}
    for task_type in ("MAP", "REDUCE"):
        sub = dataset.filter_type(task_type)
        if len(sub) == 0:
            print(f"{task_type}: no rows, skipping")
            continue
        model, cv_report = _train_one_type(dataset, task_type, kinds, args.seed)
        path = f"{args.out}.{task_type.lower()}.json"
        models.save_model(model, path)
        out_paths[task_type] = path
        cv_blocks[task_type] = cv_report
        mean = cv_report["selected_mean_accuracy"]
        print(f"{task_type}: kind={cv_report['selected_kind']} "
              f"rows={cv_report['rows']} mean_cv_accuracy={mean:.4f} model={path}")
    if not out_paths:
        raise ConfigError("dataset: no MAP or REDUCE rows to train on")
    cv_path = f"{args.out}.cv.json"
    with open(cv_path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json({"dataset": args.dataset, "per_type": cv_blocks}))
    print(f"cv_report={cv_path}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.scenario)
    schedulers = [s.strip().lower() for s in args.schedulers.split(",") if s.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not schedulers or not seeds:
        raise ConfigError("compare: need at least one scheduler and one seed")
    reports = run_matrix(cfg, schedulers, seeds, workers=args.workers)
    table = aggregate(reports)
    with open(f"{args.out}.json", "w", encoding="utf-8") as fh:
        fh.write(canonical_json(table))
    write_comparison_csv(table, f"{args.out}.csv")
    for row in table["rows"]:
        print(f"{row['scheduler']}: failed_tasks={row['failed_tasks_pct']:.2f}% "
              f"(delta {row['delta_failed_tasks_pct']:+.1f}%) "
              f"failed_jobs={row['failed_jobs_pct']:.2f}% "
              f"mean_wallclock={row['mean_job_wallclock_ms'] / 1000.0:.0f}s")
    print(f"table={args.out}.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrsim",
        description="Trace-driven MapReduce cluster simulator with "
                    "failure-aware scheduling")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation and write its report")
    p_run.add_argument("--config", required=True, help="run config file (YAML/JSON)")
    p_run.add_argument("--out", default="report.json", help="report output path")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--scheduler", default=None,
                       help="override the config scheduler (fifo|fair|capacity|atlas)")
    p_run.add_argument("--trace", default=None, help="write the event trace (JSONL)")
    p_run.add_argument("--attempts", default=None,
                       help="write the attempt log with feature snapshots (JSONL)")
    p_run.add_argument("--decisions", default=None,
                       help="write the wrapper decision log (JSONL)")
    p_run.set_defaults(func=cmd_run)

    p_exp = sub.add_parser("export-dataset",
                           help="turn an attempt log into a labeled CSV dataset")
    p_exp.add_argument("attempt_log", help="attempt log written by `run --attempts`")
    p_exp.add_argument("out", help="output CSV path")
    p_exp.add_argument("--type", choices=["MAP", "REDUCE"], default=None,
                       help="keep only one task type")
    p_exp.set_defaults(func=cmd_export_dataset)

    p_train = sub.add_parser("train",
                             help="train per-type outcome models with 10-fold CV")
    p_train.add_argument("dataset", help="dataset CSV")
    p_train.add_argument("--kind", default="forest",
                         help="model kind(s): tree|forest|glm (comma list runs CV "
                              "on each and keeps the best)")
    p_train.add_argument("--select-best", action="store_true",
                         help="evaluate tree, forest and glm; keep the best by "
                              "mean CV accuracy")
    p_train.add_argument("--out", required=True,
                         help="output prefix: writes <out>.map.json, "
                              "<out>.reduce.json, <out>.cv.json")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_cmp = sub.add_parser("compare",
                           help="run a scheduler x seed matrix and aggregate")
    p_cmp.add_argument("--scenario", required=True,
                       help="run config used as the common scenario")
    p_cmp.add_argument("--schedulers", required=True,
                       help="comma list, first one is the delta baseline")
    p_cmp.add_argument("--seeds", required=True, help="comma list of seeds")
    p_cmp.add_argument("--out", default="comparison",
                       help="output prefix for .csv and .json")
    p_cmp.add_argument("--workers", type=int, default=1,
                       help="parallel worker processes for independent runs")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        # bad inputs (config files, datasets, plans) are usage errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - stable exit-code contract
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
