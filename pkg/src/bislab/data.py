"""Long-tailed synthetic datasets: count profiles, Gaussian mixtures, augmentations.

Labeled class counts decay geometrically from n1 down to n1/lambda; the
unlabeled split shares the skew scaled by beta; the test set is balanced.
Points are class_mean + isotropic Gaussian noise, and every array is a pure
function of (spec, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_TEST_PER_CLASS = 200
WEAK_SIGMA_FACTOR = 0.05
STRONG_SIGMA_FACTOR = 0.5
DEFAULT_P_DROP = 0.1


def _round_half_up(x: float) -> int:
    # Built-in round() is round-half-even; the count profiles want .5 to go up.
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class LongTailSpec:
    """Declarative shape of an imbalanced dataset."""

    k: int = 5
    n1: int = 100
    lam: float = 20.0  # imbalance ratio N_1 / N_K
    beta: float = 2.0  # unlabeled-to-labeled ratio M / N per class
    dim: int = 8
    class_sep: float = 3.0
    noise_sigma: float = 1.0

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("need at least 2 classes")
        if self.lam < 1.0:
            raise ConfigError(f"imbalance ratio must be >= 1, got {self.lam}")
        if self.beta <= 0.0:
            raise ConfigError(f"unlabeled ratio must be positive, got {self.beta}")
        if self.n1 < 1:
            raise ConfigError("head class needs at least one labeled sample")
        if self.dim < 1:
            raise ConfigError("feature dimension must be positive")
        if self.class_sep <= 0.0:
            raise ConfigError("class separation must be positive")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise sigma must be non-negative")
        if _round_half_up(self.n1 / self.lam) < 1:
            raise ConfigError(
                f"tail class would round to zero samples (n1={self.n1}, lambda={self.lam})"
            )


def class_count_profile(k: int, n1: int, lam: float) -> np.ndarray:
    """Labeled counts N_j = round(n1 * lam**(-j/(k-1))), j = 0..k-1.

    Geometric interpolation between the head count n1 and the tail count
    n1/lam; both endpoints are exact after rounding.
    """
    if k < 2:
        raise ConfigError("need at least 2 classes")
    if lam < 1.0:
        raise ConfigError(f"imbalance ratio must be >= 1, got {lam}")
    if _round_half_up(n1 / lam) < 1:
        raise ConfigError(f"tail class would round to zero samples (n1={n1}, lambda={lam})")
    j = np.arange(k)
    raw = n1 * lam ** (-j / (k - 1))
    counts = np.array([max(1, _round_half_up(v)) for v in raw], dtype=np.int64)
    return counts


def unlabeled_count_profile(labeled: np.ndarray, beta: float) -> np.ndarray:
    """Unlabeled counts M_j = round(N_j * beta), same skew as the labeled split."""
    if beta <= 0.0:
        raise ConfigError(f"unlabeled ratio must be positive, got {beta}")
    arr = np.asarray(labeled)
    return np.array([max(1, _round_half_up(float(c) * beta)) for c in arr], dtype=np.int64)


@dataclass
class LabeledSet:
    """Feature rows with class labels, grouped for per-class draws."""

    points: np.ndarray  # (n, dim) float64
    labels: np.ndarray  # (n,) int64
    per_class_index: list[np.ndarray] = field(repr=False, default=None)

    def __post_init__(self):
        if self.per_class_index is None:
            k = int(self.labels.max()) + 1 if self.labels.size else 0
            self.per_class_index = [
                np.flatnonzero(self.labels == j) for j in range(k)
            ]
        counts = np.array([idx.size for idx in self.per_class_index], dtype=np.int64)
        self._class_counts = counts
        # flat row-index table: rows of class j live at flat[start[j] : start[j]+counts[j]]
        self._flat_index = (np.concatenate(self.per_class_index)
                            if self.per_class_index else np.empty(0, dtype=np.int64))
        self._class_start = np.concatenate([[0], np.cumsum(counts)[:-1]]) if counts.size else counts

    def rows_for(self, classes: np.ndarray, within: np.ndarray) -> np.ndarray:
        """Row indices for (class, position-within-class) pairs."""
        return self._flat_index[self._class_start[classes] + within]

    @property
    def class_counts(self) -> np.ndarray:
        return self._class_counts

    def __len__(self) -> int:
        return int(self.labels.size)


@dataclass
class UnlabeledSet:
    """Feature rows whose labels are retained for evaluation only.

    Training code receives .points and nothing else; hidden_labels exist so
    metrics can score pseudo-label quality after the fact.
    """

    points: np.ndarray
    hidden_labels: np.ndarray

    def __len__(self) -> int:
        return int(self.hidden_labels.size)


@dataclass
class Dataset:
    """One generated experiment dataset. Unpacks as (labeled, unlabeled, test)."""

    labeled: LabeledSet
    unlabeled: UnlabeledSet
    test: LabeledSet
    spec: LongTailSpec
    class_means: np.ndarray

    def __iter__(self):
        return iter((self.labeled, self.unlabeled, self.test))


def _sample_split(means: np.ndarray, counts: np.ndarray, sigma: float,
                  rng: np.random.Generator, dim: int):
    points = []
    labels = []
    for j, c in enumerate(counts):
        points.append(means[j] + sigma * rng.standard_normal((int(c), dim)))
        labels.append(np.full(int(c), j, dtype=np.int64))
    return np.concatenate(points, axis=0), np.concatenate(labels)


def make_synthetic(spec: LongTailSpec, seed: int,
                   test_per_class: int = DEFAULT_TEST_PER_CLASS) -> Dataset:
    """Generate labeled/unlabeled/test splits for the spec.

    Four independent RNG streams (class means, labeled, unlabeled, test) are
    spawned from the seed, so e.g. changing beta regenerates the unlabeled
    points without touching the test set.
    """
    if test_per_class < 1:
        raise ConfigError("test set needs at least one sample per class")
    labeled_counts = class_count_profile(spec.k, spec.n1, spec.lam)
    unlabeled_counts = unlabeled_count_profile(labeled_counts, spec.beta)

    ss = np.random.SeedSequence(seed)
    means_ss, lab_ss, unlab_ss, test_ss = ss.spawn(4)

    raw = np.random.default_rng(means_ss).standard_normal((spec.k, spec.dim))
    means = spec.class_sep * raw / np.linalg.norm(raw, axis=1, keepdims=True)

    lab_x, lab_y = _sample_split(means, labeled_counts, spec.noise_sigma,
                                 np.random.default_rng(lab_ss), spec.dim)
    unlab_x, unlab_y = _sample_split(means, unlabeled_counts, spec.noise_sigma,
                                     np.random.default_rng(unlab_ss), spec.dim)
    test_counts = np.full(spec.k, test_per_class, dtype=np.int64)
    test_x, test_y = _sample_split(means, test_counts, spec.noise_sigma,
                                   np.random.default_rng(test_ss), spec.dim)

    return Dataset(
        labeled=LabeledSet(points=lab_x, labels=lab_y),
        unlabeled=UnlabeledSet(points=unlab_x, hidden_labels=unlab_y),
        test=LabeledSet(points=test_x, labels=test_y),
        spec=spec,
        class_means=means,
    )


def weak_augment(x: np.ndarray, rng: np.random.Generator, sigma: float) -> np.ndarray:
    """Light perturbation: additive Gaussian noise with the given sigma."""
    if sigma == 0.0:
        return np.array(x, dtype=np.float64, copy=True)
    return x + sigma * rng.standard_normal(np.shape(x))


def strong_augment(x: np.ndarray, rng: np.random.Generator, sigma: float,
                   p_drop: float = DEFAULT_P_DROP) -> np.ndarray:
    """Heavy perturbation: larger Gaussian noise, then each coordinate is
    zeroed independently with probability p_drop."""
    if not 0.0 <= p_drop <= 1.0:
        raise ConfigError(f"p_drop must be a probability, got {p_drop}")
    out = x + sigma * rng.standard_normal(np.shape(x))
    keep = rng.random(np.shape(x)) >= p_drop
    return out * keep


# ---------------------------------------------------------------------------
# Dataset dump/load. Text format: '#' header lines carrying the spec and
# counts, then one CSV row per point: split,label,x0,...,x{dim-1}.
# Floats are written with repr() so the round-trip is bit-lossless.
# ---------------------------------------------------------------------------

_SPLIT_TAGS = ("labeled", "unlabeled", "test")


def dump_dataset(ds: Dataset, path) -> None:
    spec = ds.spec
    lines = [
        f"# k={spec.k} n1={spec.n1} lambda={spec.lam!r} beta={spec.beta!r} "
        f"dim={spec.dim} class_sep={spec.class_sep!r} noise_sigma={spec.noise_sigma!r}",
        f"# labeled_counts={','.join(str(c) for c in ds.labeled.class_counts)}",
        f"# unlabeled_counts={','.join(str(int(c)) for c in np.bincount(ds.unlabeled.hidden_labels, minlength=spec.k))}",
        f"# test_counts={','.join(str(c) for c in ds.test.class_counts)}",
    ]
    for mean in ds.class_means:
        lines.append("# mean=" + ",".join(repr(float(v)) for v in mean))
    splits = [
        ("labeled", ds.labeled.points, ds.labeled.labels),
        ("unlabeled", ds.unlabeled.points, ds.unlabeled.hidden_labels),
        ("test", ds.test.points, ds.test.labels),
    ]
    for tag, xs, ys in splits:
        for row, label in zip(xs, ys):
            lines.append(f"{tag},{int(label)}," + ",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header_kv(text: str) -> dict:
    out = {}
    for part in text.split():
        key, _, val = part.partition("=")
        out[key] = val
    return out


def load_dataset(path) -> Dataset:
    spec_kv = None
    means = []
    rows = {tag: ([], []) for tag in _SPLIT_TAGS}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("mean="):
                    means.append([float(v) for v in body[len("mean="):].split(",")])
                elif "=" in body and spec_kv is None and body.startswith("k="):
                    spec_kv = _parse_header_kv(body)
                continue
            tag, label, *feats = line.split(",")
            if tag not in rows:
                raise ConfigError(f"unknown split tag {tag!r} in {path}")
            rows[tag][0].append([float(v) for v in feats])
            rows[tag][1].append(int(label))
    if spec_kv is None:
        raise ConfigError(f"missing spec header in {path}")
    spec = LongTailSpec(
        k=int(spec_kv["k"]), n1=int(spec_kv["n1"]), lam=float(spec_kv["lambda"]),
        beta=float(spec_kv["beta"]), dim=int(spec_kv["dim"]),
        class_sep=float(spec_kv["class_sep"]), noise_sigma=float(spec_kv["noise_sigma"]),
    )

    def _arrays(tag):
        xs, ys = rows[tag]
        return (np.array(xs, dtype=np.float64).reshape(len(ys), spec.dim),
                np.array(ys, dtype=np.int64))

    lab_x, lab_y = _arrays("labeled")
    unlab_x, unlab_y = _arrays("unlabeled")
    test_x, test_y = _arrays("test")
    return Dataset(
        labeled=LabeledSet(points=lab_x, labels=lab_y),
        unlabeled=UnlabeledSet(points=unlab_x, hidden_labels=unlab_y),
        test=LabeledSet(points=test_x, labels=test_y),
        spec=spec,
        class_means=np.array(means, dtype=np.float64),
    )
