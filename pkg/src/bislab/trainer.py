"""Semi-supervised training loops: joint, decoupled fine-tune, and blended.

Each step draws a labeled batch through a class-sampling strategy, draws an
unlabeled batch uniformly, pseudo-labels its weakly augmented view, keeps
confident pseudo labels with probability mu^q, and applies one SGD update on
CE(labeled) + lambda_u * CE(strong view vs pseudo labels, kept mask).

All class-sampling strategies are derived from labeled counts only; hidden
unlabeled labels flow exclusively into evaluation records, never gradients.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import (
    DEFAULT_P_DROP,
    STRONG_SIGMA_FACTOR,
    WEAK_SIGMA_FACTOR,
    Dataset,
    weak_augment,
    strong_augment,
)
from .errors import ConfigError, TrainingDiverged
from .metrics import (
    MetricsReport,
    accuracy_from_confusion,
    confusion,
    precision_recall,
    pseudo_diagnostics_arrays,
)
from .model import (
    MicroModel,
    add_scaled,
    apply_update,
    clone_model,
    freeze_features,
    init_model,
    loss_and_grad,
    predict_labels,
    predict_probs,
)
from .records import RunRecord
from .sampling import (
    BisSchedule,
    SamplerStrategy,
    build_strategy,
    draw_classes,
    strategy_at,
)

SAMPLER_KINDS = ("random", "mean", "reverse")
DEFAULT_FINETUNE_LR_SCALE = 1.0 / 20.0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    steps_per_epoch: int = 200
    batch_labeled: int = 64
    batch_unlabeled: int = 64
    tau: float = 0.95
    lambda_u: float = 1.0
    q: float = 1.0 / 3.0
    lr: float = 0.05
    hidden: int = 64
    labeled_sampler: str = "random"
    unlabeled_sampler: str = "random"
    bis: BisSchedule | None = None
    finetune_lr_scale: float = DEFAULT_FINETUNE_LR_SCALE

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.steps_per_epoch < 1:
            raise ConfigError("steps_per_epoch must be >= 1")
        if self.batch_labeled < 1 or self.batch_unlabeled < 1:
            raise ConfigError("batch sizes must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.lambda_u < 0.0:
            raise ConfigError(f"lambda_u must be >= 0, got {self.lambda_u}")
        if self.q < 0.0:
            raise ConfigError(f"q must be >= 0, got {self.q}")
        if self.lr <= 0.0:
            raise ConfigError("learning rate must be positive")
        if self.hidden < 1:
            raise ConfigError("hidden width must be >= 1")
        if self.labeled_sampler not in SAMPLER_KINDS:
            raise ConfigError(f"unknown labeled sampler {self.labeled_sampler!r}")
        if self.unlabeled_sampler not in SAMPLER_KINDS:
            raise ConfigError(f"unknown unlabeled sampler {self.unlabeled_sampler!r}")
        if not 0.0 < self.finetune_lr_scale <= 1.0:
            raise ConfigError("finetune_lr_scale must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = {
            "epochs": self.epochs,
            "steps_per_epoch": self.steps_per_epoch,
            "batch_labeled": self.batch_labeled,
            "batch_unlabeled": self.batch_unlabeled,
            "tau": self.tau,
            "lambda_u": self.lambda_u,
            "q": self.q,
            "lr": self.lr,
            "hidden": self.hidden,
            "labeled_sampler": self.labeled_sampler,
            "unlabeled_sampler": self.unlabeled_sampler,
            "finetune_lr_scale": self.finetune_lr_scale,
        }
        if self.bis is not None:
            d["bis"] = {
                "kind": self.bis.kind,
                "t_max": self.bis.t_max,
                "sampler_a": self.bis.sampler_a.kind,
                "sampler_b": self.bis.sampler_b.kind,
            }
        return d


@dataclass
class PseudoLabelRecord:
    """One unlabeled sample's pseudo-labeling outcome within a step."""

    index: int
    pseudo_label: int
    confidence: float
    kept: bool
    hidden_true_label: int


@dataclass
class PseudoStepResult:
    """Vectorized outcome of pseudo-labeling one unlabeled batch."""

    indices: np.ndarray
    pseudo: np.ndarray
    confidence: np.ndarray
    kept: np.ndarray  # bool mask
    hidden: np.ndarray
    strong: np.ndarray  # strongly augmented batch, full size

    def records(self) -> list[PseudoLabelRecord]:
        return [
            PseudoLabelRecord(
                index=int(self.indices[i]),
                pseudo_label=int(self.pseudo[i]),
                confidence=float(self.confidence[i]),
                kept=bool(self.kept[i]),
                hidden_true_label=int(self.hidden[i]),
            )
            for i in range(self.pseudo.size)
        ]


def make_bis_schedule(kind: str, sampler_a: str, sampler_b: str,
                      epochs: int, labeled_counts) -> BisSchedule:
    """Build a schedule whose final training epoch reaches alpha = 0.

    Epochs are indexed 0..epochs-1, so t_max = epochs - 1 (floored at 1):
    the first epoch runs pure sampler_a, the last pure sampler_b.
    """
    if sampler_a not in SAMPLER_KINDS or sampler_b not in SAMPLER_KINDS:
        raise ConfigError(f"unknown sampler pair ({sampler_a!r}, {sampler_b!r})")
    return BisSchedule(
        kind=kind,
        t_max=max(epochs - 1, 1),
        sampler_a=build_strategy(sampler_a, labeled_counts),
        sampler_b=build_strategy(sampler_b, labeled_counts),
    )


def labeled_batch(strategy: SamplerStrategy, labeled_set, rng: np.random.Generator,
                  size: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw a batch: class j ~ strategy, then a uniform example of class j."""
    counts = labeled_set.class_counts
    if len(strategy) != counts.size:
        raise ConfigError("strategy and dataset disagree on class count")
    if np.any((strategy.probs > 0.0) & (counts == 0)):
        raise ConfigError("sampling strategy assigns probability to an empty class")
    classes = draw_classes(strategy, rng, size)
    within = rng.integers(0, counts[classes])
    rows = labeled_set.rows_for(classes, within)
    return labeled_set.points[rows], labeled_set.labels[rows]


def pseudo_label_step(model: MicroModel, batch: np.ndarray, strategy: SamplerStrategy,
                      q: float, tau: float, rng: np.random.Generator,
                      sigma_weak: float, sigma_strong: float,
                      p_drop: float = DEFAULT_P_DROP,
                      indices: np.ndarray | None = None,
                      hidden_labels: np.ndarray | None = None) -> PseudoStepResult:
    """Pseudo-label one unlabeled batch.

    Predict on the weak view; pseudo label = argmax (ties to the lowest
    index); keep iff confidence >= tau and a Bernoulli(mu_j^q) success. The
    strong view is returned for the whole batch; the kept mask weights it in
    the loss. hidden_labels are carried through untouched for evaluation.
    """
    B = batch.shape[0]
    weak = weak_augment(batch, rng, sigma_weak)
    probs = predict_probs(model, weak)
    pseudo = np.argmax(probs, axis=1)
    conf = probs[np.arange(B), pseudo]
    strong = strong_augment(batch, rng, sigma_strong, p_drop)
    # One uniform draw per sample regardless of tau, to keep the stream
    # layout independent of model confidence.
    u = rng.random(B)
    if q == 0.0:
        keep_p = np.ones(B)
    else:
        keep_p = strategy.probs[pseudo] ** q
    kept = (conf >= tau) & (u < keep_p)
    return PseudoStepResult(
        indices=np.arange(B) if indices is None else np.asarray(indices),
        pseudo=pseudo,
        confidence=conf,
        kept=kept,
        hidden=np.full(B, -1, dtype=np.int64) if hidden_labels is None
        else np.asarray(hidden_labels, dtype=np.int64),
        strong=strong,
    )


def evaluate_model(model: MicroModel, test_set) -> tuple[float, np.ndarray, np.ndarray]:
    """(accuracy, per-class precision, per-class recall) on a labeled set."""
    preds = predict_labels(model, test_set.points)
    cm = confusion(preds, test_set.labels, model.k)
    precision, recall = precision_recall(cm)
    return accuracy_from_confusion(cm), precision, recall


def _echo_config(config: TrainConfig, data: Dataset, seed: int,
                 data_seed: int | None) -> dict:
    spec = data.spec
    echo = config.to_dict()
    echo["data"] = {
        "k": spec.k, "n1": spec.n1, "lambda": spec.lam, "beta": spec.beta,
        "dim": spec.dim, "class_sep": spec.class_sep, "noise_sigma": spec.noise_sigma,
        "test_per_class": int(data.test.class_counts[0]) if len(data.test) else 0,
    }
    echo["train_seed"] = seed
    if data_seed is not None:
        echo["data_seed"] = data_seed
    return echo


def _train_loop(model: MicroModel, config: TrainConfig, data: Dataset, seed: int,
                stage: str, strategies_for_epoch, lr: float, run_id: str,
                data_seed: int | None) -> tuple[MicroModel, RunRecord]:
    """Shared engine. strategies_for_epoch(t) -> (labeled strategy, keep strategy)."""
    labeled, unlabeled, test = data.labeled, data.unlabeled, data.test
    spec = data.spec
    sigma_weak = WEAK_SIGMA_FACTOR * spec.noise_sigma
    sigma_strong = STRONG_SIGMA_FACTOR * spec.noise_sigma

    ss = np.random.SeedSequence(seed)
    init_ss, lab_ss, unlab_ss = ss.spawn(3)
    lab_rng = np.random.default_rng(lab_ss)
    unlab_rng = np.random.default_rng(unlab_ss)
    if model is None:
        model = init_model(spec.dim, spec.k, hidden=config.hidden,
                           rng=np.random.default_rng(init_ss))

    use_unlabeled = config.lambda_u > 0.0 and len(unlabeled) > 0
    M = len(unlabeled)

    echo = _echo_config(config, data, seed, data_seed)
    history: list[MetricsReport] = []
    started = time.perf_counter()

    def _finish(final: MetricsReport) -> RunRecord:
        return RunRecord(
            run_id=run_id, stage=stage, seed=seed, config=echo,
            history=history, final=final,
            wall_seconds=time.perf_counter() - started,
        )

    for epoch in range(config.epochs):
        lab_strategy, keep_strategy = strategies_for_epoch(epoch)
        ep_kept = []
        ep_pseudo = []
        ep_hidden = []
        for _ in range(config.steps_per_epoch):
            xb, yb = labeled_batch(lab_strategy, labeled, lab_rng, config.batch_labeled)
            loss, grads = loss_and_grad(model, xb, yb, np.ones(config.batch_labeled))
            if use_unlabeled:
                idx = unlab_rng.integers(0, M, size=config.batch_unlabeled)
                step = pseudo_label_step(
                    model, unlabeled.points[idx], keep_strategy, config.q,
                    config.tau, unlab_rng, sigma_weak, sigma_strong,
                    indices=idx, hidden_labels=unlabeled.hidden_labels[idx],
                )
                loss_u, grads_u = loss_and_grad(
                    model, step.strong, step.pseudo, step.kept.astype(np.float64)
                )
                loss += config.lambda_u * loss_u
                add_scaled(grads, grads_u, config.lambda_u)
                ep_kept.append(step.kept)
                ep_pseudo.append(step.pseudo)
                ep_hidden.append(step.hidden)
            if not np.isfinite(loss):
                partial = _finish(_report(model, test, ep_kept, ep_pseudo, ep_hidden, spec.k))
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} ({run_id}); "
                    f"{len(history)} finite epochs recorded", record=partial,
                )
            apply_update(model, grads, lr)
        history.append(_report(model, test, ep_kept, ep_pseudo, ep_hidden, spec.k))

    final = history[-1] if history else _report(model, test, [], [], [], spec.k)
    return model, _finish(final)


def _report(model, test, ep_kept, ep_pseudo, ep_hidden, k) -> MetricsReport:
    accuracy, precision, recall = evaluate_model(model, test)
    if ep_kept:
        frac, hist, acc = pseudo_diagnostics_arrays(
            np.concatenate(ep_kept), np.concatenate(ep_pseudo),
            np.concatenate(ep_hidden), k,
        )
    else:
        frac, hist, acc = 0.0, np.zeros(k, dtype=np.int64), np.zeros(k)
    return MetricsReport(
        accuracy=accuracy, per_class_precision=precision, per_class_recall=recall,
        pseudo_kept_fraction=frac, pseudo_accuracy_per_class=acc,
        pseudo_class_histogram=hist,
    )


def train_joint(config: TrainConfig, data: Dataset, seed: int,
                run_id: str = "joint", data_seed: int | None = None
                ) -> tuple[MicroModel, RunRecord]:
    """Train extractor and classifier together with a fixed sampler pair."""
    if config.bis is not None:
        raise ConfigError("train_joint does not take a blend schedule; use train_bis")
    counts = data.labeled.class_counts
    lab = build_strategy(config.labeled_sampler, counts)
    keep = build_strategy(config.unlabeled_sampler, counts)
    return _train_loop(None, config, data, seed, "joint",
                       lambda t: (lab, keep), config.lr, run_id, data_seed)


def finetune_classifier(model: MicroModel, config: TrainConfig, data: Dataset,
                        seed: int, run_id: str = "finetune",
                        data_seed: int | None = None) -> tuple[MicroModel, RunRecord]:
    """Freeze the extractor of a copy of model and retrain the classifier
    at lr * finetune_lr_scale with the config's sampler pair."""
    if config.bis is not None:
        raise ConfigError("fine-tuning does not take a blend schedule")
    tuned = freeze_features(clone_model(model))
    counts = data.labeled.class_counts
    lab = build_strategy(config.labeled_sampler, counts)
    keep = build_strategy(config.unlabeled_sampler, counts)
    lr = config.lr * config.finetune_lr_scale
    return _train_loop(tuned, config, data, seed, "finetune",
                       lambda t: (lab, keep), lr, run_id, data_seed)


def train_bis(config: TrainConfig, data: Dataset, seed: int,
              run_id: str = "bis", data_seed: int | None = None
              ) -> tuple[MicroModel, RunRecord]:
    """End-to-end training under a blend schedule: each epoch's strategy is
    alpha(t) * sampler_a + (1 - alpha(t)) * sampler_b, used both for labeled
    batches and as the base of the keep probability."""
    if config.bis is None:
        raise ConfigError("train_bis needs a blend schedule in the config")
    schedule = config.bis
    if len(schedule.sampler_a) != data.spec.k:
        raise ConfigError("blend schedule and dataset disagree on class count")

    def strategies(t: int):
        blended = strategy_at(schedule, min(t, schedule.t_max))
        return blended, blended

    return _train_loop(None, config, data, seed, "bis",
                       lambda t: strategies(t), config.lr, run_id, data_seed)
