"""Experiment grids: enumerate, execute, and tabulate batches of runs.

A grid is the cross product of (lambda, beta) cells, q values and seeds
with one joint run per sampler pair and one blend run per pair x schedule.
Each finished run lands as runs/<run_id>.json; after the grid completes,
three CSVs are rewritten in enumeration order (so output is independent of
execution order): summary.csv (one row per run), per_class.csv (one row per
run x epoch x class), failures.csv (runs that diverged, grid keeps going).
Resuming skips any run whose JSON already exists and reloads it for the
CSVs; wall_seconds is not stored in JSON, so resumed rows show 0.0 there.
"""

from __future__ import annotations

import csv
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from time import perf_counter

from .data import LongTailSpec, make_synthetic
from .errors import ConfigError, TrainingDiverged
from .records import RunRecord
from .trainer import (
    TrainConfig,
    make_bis_schedule,
    train_bis,
    train_joint,
)

# data streams get their own seed space so train seed s never aliases them
DATA_SEED_OFFSET = 1000
NO_SCHEDULE = "none"

SUMMARY_COLUMNS = (
    "run_id", "stage", "seed", "lambda", "beta",
    "labeled_sampler", "unlabeled_sampler", "q", "schedule", "epochs",
    "accuracy", "min_class_recall", "max_class_recall", "recall_spearman",
    "pseudo_kept_fraction", "wall_seconds",
)
PER_CLASS_COLUMNS = ("run_id", "epoch", "class", "recall", "precision", "pseudo_count")
FAILURE_COLUMNS = ("run_id", "stage", "seed", "error")

DEFAULT_LAMBDAS = (5.0, 10.0, 20.0)
DEFAULT_BETAS = (1.0, 2.0)
DEFAULT_PAIRS = tuple(
    (a, b)
    for a in ("random", "mean", "reverse")
    for b in ("random", "mean", "reverse")
)
DEFAULT_Q_VALUES = (1.0 / 3.0,)
DEFAULT_SEEDS = (0, 1, 2)


@dataclass(frozen=True)
class GridSpec:
    """The experiment matrix plus the base config every run is derived from."""

    cells: tuple[tuple[float, float], ...]
    pairs: tuple[tuple[str, str], ...] = DEFAULT_PAIRS
    schedules: tuple[str, ...] = ()
    q_values: tuple[float, ...] = DEFAULT_Q_VALUES
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    base_train: TrainConfig = None
    base_data: LongTailSpec = None

    def __post_init__(self):
        if not self.cells:
            raise ConfigError("grid needs at least one (lambda, beta) cell")
        if not self.seeds:
            raise ConfigError("grid needs at least one seed")
        if not self.q_values:
            raise ConfigError("grid needs at least one q value")
        if not self.pairs and not self.schedules:
            raise ConfigError("grid needs sampler pairs or schedules (or both)")
        if self.base_train is None:
            object.__setattr__(self, "base_train", TrainConfig())
        if self.base_data is None:
            object.__setattr__(self, "base_data", LongTailSpec())
        if self.base_train.bis is not None:
            raise ConfigError("grid base config must not carry a blend schedule")


def grid_spec_from_settings(settings: dict) -> GridSpec:
    from .config import data_spec, train_config

    g = settings.get("grid", {})
    lambdas = g.get("lambdas", list(DEFAULT_LAMBDAS))
    betas = g.get("betas", list(DEFAULT_BETAS))
    return GridSpec(
        cells=tuple((lam, beta) for lam in lambdas for beta in betas),
        pairs=tuple(g.get("pairs", DEFAULT_PAIRS)),
        schedules=tuple(g.get("schedules", ())),
        q_values=tuple(g.get("q_values", DEFAULT_Q_VALUES)),
        seeds=tuple(g.get("seeds", DEFAULT_SEEDS)),
        base_train=train_config(settings),
        base_data=data_spec(settings),
    )


@dataclass(frozen=True)
class RunTask:
    run_id: str
    stage: str
    lam: float
    beta: float
    labeled_sampler: str
    unlabeled_sampler: str
    q: float
    schedule: str
    seed: int


def _task_id(stage, lam, beta, a, b, q, schedule, seed) -> str:
    mid = f"lam{lam:g}-beta{beta:g}-{a}-{b}-q{q:g}"
    if stage == "bis":
        return f"bis-{mid}-{schedule}-s{seed}"
    return f"{stage}-{mid}-s{seed}"


def enumerate_runs(spec: GridSpec) -> list[RunTask]:
    """Deterministic run order: cells, then q, then pairs (joint before
    blends), schedules, seeds innermost."""
    tasks = []
    for lam, beta in spec.cells:
        for q in spec.q_values:
            for a, b in spec.pairs:
                for seed in spec.seeds:
                    tasks.append(RunTask(
                        run_id=_task_id("joint", lam, beta, a, b, q, NO_SCHEDULE, seed),
                        stage="joint", lam=lam, beta=beta,
                        labeled_sampler=a, unlabeled_sampler=b,
                        q=q, schedule=NO_SCHEDULE, seed=seed))
            for a, b in spec.pairs:
                for schedule in spec.schedules:
                    for seed in spec.seeds:
                        tasks.append(RunTask(
                            run_id=_task_id("bis", lam, beta, a, b, q, schedule, seed),
                            stage="bis", lam=lam, beta=beta,
                            labeled_sampler=a, unlabeled_sampler=b,
                            q=q, schedule=schedule, seed=seed))
    ids = {t.run_id for t in tasks}
    if len(ids) != len(tasks):
        raise ConfigError("duplicate run ids; check for repeated grid axes values")
    return tasks


def execute_task(task: RunTask, base_train: TrainConfig,
                 base_data: LongTailSpec) -> RunRecord:
    """Run one grid cell; used directly and as the process-pool worker."""
    data_seed = DATA_SEED_OFFSET + task.seed
    data = make_synthetic(replace(base_data, lam=task.lam, beta=task.beta),
                          seed=data_seed)
    cfg = replace(base_train, labeled_sampler=task.labeled_sampler,
                  unlabeled_sampler=task.unlabeled_sampler, q=task.q)
    start = perf_counter()
    if task.stage == "bis":
        cfg = replace(cfg, bis=make_bis_schedule(
            task.schedule, task.labeled_sampler, task.unlabeled_sampler,
            cfg.epochs, data.labeled.class_counts))
        _, record = train_bis(cfg, data, seed=task.seed,
                              run_id=task.run_id, data_seed=data_seed)
    else:
        _, record = train_joint(cfg, data, seed=task.seed,
                                run_id=task.run_id, data_seed=data_seed)
    record.wall_seconds = perf_counter() - start
    return record


def _worker(args):
    task, base_train, base_data = args
    try:
        return task.run_id, execute_task(task, base_train, base_data), None
    except TrainingDiverged as exc:
        return task.run_id, None, str(exc)


def _float_cell(value) -> str:
    return repr(float(value))


def summary_row(task: RunTask, record: RunRecord) -> dict:
    final = record.final
    return {
        "run_id": task.run_id,
        "stage": task.stage,
        "seed": str(task.seed),
        "lambda": _float_cell(task.lam),
        "beta": _float_cell(task.beta),
        "labeled_sampler": task.labeled_sampler,
        "unlabeled_sampler": task.unlabeled_sampler,
        "q": _float_cell(task.q),
        "schedule": task.schedule,
        "epochs": str(record.config["epochs"]),
        "accuracy": _float_cell(final.accuracy),
        "min_class_recall": _float_cell(final.min_class_recall),
        "max_class_recall": _float_cell(final.max_class_recall),
        "recall_spearman": _float_cell(final.recall_trend),
        "pseudo_kept_fraction": _float_cell(final.pseudo_kept_fraction),
        "wall_seconds": _float_cell(record.wall_seconds),
    }


def per_class_rows(run_id: str, record: RunRecord):
    for epoch, rep in enumerate(record.history):
        for cls in range(len(rep.per_class_recall)):
            yield {
                "run_id": run_id,
                "epoch": str(epoch),
                "class": str(cls),
                "recall": _float_cell(rep.per_class_recall[cls]),
                "precision": _float_cell(rep.per_class_precision[cls]),
                "pseudo_count": str(int(rep.pseudo_class_histogram[cls])),
            }


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        writer.writerows(rows)


@dataclass
class GridOutcome:
    completed: list
    skipped: list
    failed: list


def run_grid(spec: GridSpec, out_dir, jobs: int = 1, resume: bool = False,
             log=None) -> GridOutcome:
    """Execute every run of the grid and (re)write the CSV tables.

    JSON files are written as runs finish; the CSVs are rewritten once at
    the end in enumeration order, covering resumed runs too.
    """
    say = log or (lambda msg: None)
    out = Path(out_dir)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    tasks = enumerate_runs(spec)

    records: dict[str, RunRecord] = {}
    failures: dict[str, str] = {}
    todo = []
    skipped = []
    for task in tasks:
        path = runs_dir / f"{task.run_id}.json"
        if resume and path.exists():
            records[task.run_id] = RunRecord.load(path)
            skipped.append(task.run_id)
        else:
            todo.append(task)
    if skipped:
        say(f"resume: skipping {len(skipped)} finished runs")

    def finish(run_id: str, record: RunRecord | None, error: str | None):
        if record is None:
            failures[run_id] = error
            say(f"FAILED {run_id}: {error}")
            return
        record.save(runs_dir / f"{run_id}.json")
        records[run_id] = record
        say(f"done {run_id} ({record.wall_seconds:.1f}s)")

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            args = [(task, spec.base_train, spec.base_data) for task in todo]
            for run_id, record, error in pool.map(_worker, args):
                finish(run_id, record, error)
    else:
        for task in todo:
            finish(*_worker((task, spec.base_train, spec.base_data)))

    srows, crows, frows = [], [], []
    for task in tasks:
        if task.run_id in records:
            record = records[task.run_id]
            srows.append(summary_row(task, record))
            crows.extend(per_class_rows(task.run_id, record))
        elif task.run_id in failures:
            frows.append({"run_id": task.run_id, "stage": task.stage,
                          "seed": str(task.seed), "error": failures[task.run_id]})
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, srows)
    _write_csv(out / "per_class.csv", PER_CLASS_COLUMNS, crows)
    _write_csv(out / "failures.csv", FAILURE_COLUMNS, frows)
    return GridOutcome(completed=sorted(records), skipped=skipped,
                       failed=sorted(failures))


# aggregation for the report command

GROUP_COLUMNS = ("stage", "lambda", "beta", "labeled_sampler",
                 "unlabeled_sampler", "q", "schedule", "epochs")
METRIC_COLUMNS = ("accuracy", "min_class_recall", "max_class_recall",
                  "recall_spearman", "pseudo_kept_fraction")


def read_summary(path) -> list[dict]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read summary CSV {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"summary CSV {path} has no data rows")
    missing = set(SUMMARY_COLUMNS) - set(rows[0])
    if missing:
        raise ConfigError(f"summary CSV {path} lacks columns {sorted(missing)}")
    return rows


def aggregate_summary(rows: list[dict]) -> list[dict]:
    """Collapse seeds: one output row per config group with mean and sd
    (population sd, so a single seed reports 0) for every metric column."""
    groups: dict[tuple, list[dict]] = {}
    order = []
    for row in rows:
        key = tuple(row[c] for c in GROUP_COLUMNS)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        members = groups[key]
        agg = dict(zip(GROUP_COLUMNS, key))
        agg["n_seeds"] = str(len(members))
        for metric in METRIC_COLUMNS:
            values = [float(m[metric]) for m in members]
            agg[f"{metric}_mean"] = _float_cell(statistics.fmean(values))
            agg[f"{metric}_sd"] = _float_cell(statistics.pstdev(values))
        out.append(agg)
    return out


REPORT_COLUMNS = tuple(GROUP_COLUMNS) + ("n_seeds",) + tuple(
    f"{metric}_{suffix}" for metric in METRIC_COLUMNS for suffix in ("mean", "sd"))


def write_report(agg_rows: list[dict], csv_path) -> str:
    """Write the aggregate CSV and return an aligned-text rendering."""
    _write_csv(Path(csv_path), REPORT_COLUMNS, agg_rows)
    show = list(GROUP_COLUMNS) + ["n_seeds", "accuracy_mean", "accuracy_sd",
                                  "min_class_recall_mean", "recall_spearman_mean"]
    table = [show]
    for row in agg_rows:
        rendered = []
        for col in show:
            value = row[col]
            if col.endswith(("_mean", "_sd")):
                value = f"{float(value):.4f}"
            rendered.append(value)
        table.append(rendered)
    widths = [max(len(line[i]) for line in table) for i in range(len(show))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
             for line in table]
    return "\n".join(lines) + "\n"
