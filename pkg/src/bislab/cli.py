"""Command-line harness: dataset generation, single runs, grids, reports.

Single-run subcommands write runs/<run_id>.json under the output directory
and append one row to its summary.csv so ad-hoc runs and grid runs land in
the same table. Exit codes: 0 success, 1 bad configuration, 2 runtime
failure (divergence, unreadable files).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path
from time import perf_counter

from .config import (
    data_seed,
    data_spec,
    eval_per_class,
    load_settings,
    run_seed,
    train_config,
)
from .data import dump_dataset, load_dataset, make_synthetic
from .errors import ConfigError, TrainingDiverged
from .grid import (
    NO_SCHEDULE,
    SUMMARY_COLUMNS,
    RunTask,
    aggregate_summary,
    grid_spec_from_settings,
    read_summary,
    run_grid,
    summary_row,
    write_report,
)
from .model import feature_hash, load_checkpoint, save_checkpoint
from .trainer import finetune_classifier, train_bis, train_joint

OUT_ENV = "BIS_LAB_OUT"
DEFAULT_OUT = "bislab_out"


def default_out() -> str:
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


def _common_flags(sub, data_file: bool = True):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="SECTION.KEY=VALUE", help="override one config key")
    sub.add_argument("--out", default=None, help=f"output directory "
                     f"(default ${OUT_ENV} or ./{DEFAULT_OUT})")
    if data_file:
        sub.add_argument("--data", help="dataset dump to train on "
                         "(default: synthesize from [data] settings)")


def _run_flags(sub):
    sub.add_argument("--seed", type=int, default=None,
                     help="training seed (overrides [run] seed)")
    sub.add_argument("--run-id", default=None)
    sub.add_argument("--save-model", default=None, metavar="PATH",
                     help="write the trained model checkpoint here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bislab",
        description="Long-tailed semi-supervised training experiments "
                    "with blended sampling strategies.")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="synthesize a dataset and dump it to disk")
    _common_flags(gen, data_file=False)
    gen.add_argument("--seed", type=int, default=None,
                     help="data seed (overrides [data] seed)")
    gen.add_argument("--force", action="store_true", help="overwrite an existing dump")
    gen.set_defaults(func=cmd_gen)

    for name, helptext in (("train", "joint training with a fixed sampler pair"),
                           ("finetune", "retrain the classifier of a checkpoint"),
                           ("bis", "end-to-end training with a blend schedule")):
        sub = subs.add_parser(name, help=helptext)
        _common_flags(sub)
        _run_flags(sub)
        if name == "finetune":
            sub.add_argument("--model", required=True,
                             help="checkpoint produced by train --save-model")
        sub.set_defaults(func={"train": cmd_train, "finetune": cmd_finetune,
                               "bis": cmd_bis}[name])

    grid = subs.add_parser("grid", help="run a [grid] section's experiment matrix")
    _common_flags(grid, data_file=False)
    grid.add_argument("--jobs", type=int, default=1, help="parallel runs")
    grid.add_argument("--resume", action="store_true",
                      help="skip runs whose JSON already exists")
    grid.set_defaults(func=cmd_grid)

    report = subs.add_parser("report", help="aggregate a summary.csv over seeds")
    report.add_argument("summary", help="path to summary.csv")
    report.add_argument("--out", default=None,
                        help="aggregate CSV path (default: report.csv next to input)")
    report.set_defaults(func=cmd_report)
    return parser


def cmd_gen(args) -> int:
    settings = load_settings(args.config, tuple(args.overrides))
    spec = data_spec(settings)
    seed = args.seed if args.seed is not None else data_seed(settings)
    out = Path(args.out or default_out())
    out.mkdir(parents=True, exist_ok=True)
    path = out / "dataset.txt"
    if path.exists() and not args.force:
        raise ConfigError(f"{path} already exists; pass --force to overwrite")
    data = make_synthetic(spec, seed=seed, test_per_class=eval_per_class(settings))
    dump_dataset(data, path)
    counts = ",".join(str(c) for c in data.labeled.class_counts)
    print(f"wrote {path} (labeled per class: {counts}, seed {seed})")
    return 0


def _load_data(args, settings):
    if args.data:
        return load_dataset(args.data), None
    seed = data_seed(settings)
    data = make_synthetic(data_spec(settings), seed=seed,
                          test_per_class=eval_per_class(settings))
    return data, seed


def _append_summary(out: Path, task: RunTask, record) -> None:
    path = out / "summary.csv"
    fresh = not path.exists()
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(SUMMARY_COLUMNS))
        if fresh:
            writer.writeheader()
        writer.writerow(summary_row(task, record))


def _single_run(args, stage: str) -> int:
    settings = load_settings(args.config, tuple(args.overrides))
    data, dseed = _load_data(args, settings)
    cfg = train_config(settings, labeled_counts=data.labeled.class_counts,
                       with_bis=(stage == "bis"))
    seed = args.seed if args.seed is not None else run_seed(settings)
    run_id = args.run_id or f"{stage}-s{seed}"

    start = perf_counter()
    if stage == "bis":
        model, record = train_bis(cfg, data, seed=seed, run_id=run_id,
                                  data_seed=dseed)
    elif stage == "finetune":
        source = load_checkpoint(args.model)
        model, record = finetune_classifier(source, cfg, data, seed=seed,
                                            run_id=run_id, data_seed=dseed)
    else:
        model, record = train_joint(cfg, data, seed=seed, run_id=run_id,
                                    data_seed=dseed)
    record.wall_seconds = perf_counter() - start

    out = Path(args.out or default_out())
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    record.save(runs_dir / f"{run_id}.json")
    spec = data.spec
    if cfg.bis is not None:
        samplers = (cfg.bis.sampler_a.kind, cfg.bis.sampler_b.kind)
    else:
        samplers = (cfg.labeled_sampler, cfg.unlabeled_sampler)
    task = RunTask(run_id=run_id, stage=stage, lam=spec.lam, beta=spec.beta,
                   labeled_sampler=samplers[0], unlabeled_sampler=samplers[1],
                   q=cfg.q, schedule=cfg.bis.kind if cfg.bis else NO_SCHEDULE,
                   seed=seed)
    _append_summary(out, task, record)
    if args.save_model:
        save_checkpoint(model, args.save_model)
    print(f"{run_id}: accuracy {record.final.accuracy:.4f}, "
          f"min class recall {record.final.min_class_recall:.4f}, "
          f"feature hash {feature_hash(model)[:16]}")
    return 0


def cmd_train(args) -> int:
    return _single_run(args, "joint")


def cmd_finetune(args) -> int:
    return _single_run(args, "finetune")


def cmd_bis(args) -> int:
    return _single_run(args, "bis")


def cmd_grid(args) -> int:
    settings = load_settings(args.config, tuple(args.overrides))
    spec = grid_spec_from_settings(settings)
    out = Path(args.out or default_out())
    outcome = run_grid(spec, out, jobs=args.jobs, resume=args.resume, log=print)
    done, failed = len(outcome.completed), len(outcome.failed)
    print(f"grid finished: {done} runs ({len(outcome.skipped)} resumed), "
          f"{failed} failed; tables under {out}")
    if failed and not done:
        return 2
    return 0


def cmd_report(args) -> int:
    rows = read_summary(args.summary)
    agg = aggregate_summary(rows)
    out = Path(args.out) if args.out else Path(args.summary).parent / "report.csv"
    text = write_report(agg, out)
    sys.stdout.write(text)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
