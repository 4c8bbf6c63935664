"""Class-sampling probability vectors and the blended-sampler schedule.

Three base strategies over K classes (random = proportional to class counts,
mean = uniform, reverse = proportional to reciprocal counts), the keep
probability mu_j**q used to thin pseudo-labeled data, a convex blend of two
strategies, and the four decay rules that move the blend weight from 1 to 0
over training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STRATEGY_KINDS = ("random", "mean", "reverse", "blended")
SCHEDULE_KINDS = ("equal", "linear", "cosine", "parabolic")

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SamplerStrategy:
    """A per-class sampling distribution mu over K classes."""

    probs: np.ndarray
    kind: str

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError("strategy needs a 1-d probability vector of length >= 2")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("strategy probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"strategy probabilities sum to {probs.sum()}, not 1")

    def __len__(self) -> int:
        return int(self.probs.size)


@dataclass(frozen=True)
class BisSchedule:
    """Blend-weight decay rule: alpha(t) moves batches from sampler_a to sampler_b.

    t_max is the final epoch index; linear/cosine/parabolic hit alpha(0) = 1
    and alpha(t_max) = 0 exactly, while "equal" stays at 0.5 throughout.
    """

    kind: str
    t_max: int
    sampler_a: SamplerStrategy
    sampler_b: SamplerStrategy

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.t_max < 1:
            raise ValueError("t_max must be a positive integer")
        if len(self.sampler_a) != len(self.sampler_b):
            raise ValueError("sampler_a and sampler_b must cover the same classes")


def _validate_counts(counts) -> np.ndarray:
    arr = np.asarray(counts)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need a 1-d count vector of length >= 2")
    if np.any(arr < 0):
        raise ValueError("class counts must be non-negative")
    return arr.astype(np.float64)


def random_probs(counts) -> SamplerStrategy:
    """Sampling proportional to class counts: mu_j = N_j / sum_i N_i."""
    arr = _validate_counts(counts)
    total = arr.sum()
    if total <= 0:
        raise ValueError("random sampling needs at least one non-empty class")
    return SamplerStrategy(probs=arr / total, kind="random")


def mean_probs(k: int) -> SamplerStrategy:
    """Uniform sampling: mu_j = 1/k for every class."""
    if k < 2:
        raise ValueError("need at least 2 classes")
    return SamplerStrategy(probs=np.full(k, 1.0 / k), kind="mean")


def reverse_probs(counts) -> SamplerStrategy:
    """Sampling proportional to reciprocal counts: mu_j = (1/N_j) / sum_i (1/N_i)."""
    arr = _validate_counts(counts)
    if np.any(arr == 0):
        raise ValueError("reverse sampling undefined for empty classes")
    inv = 1.0 / arr
    return SamplerStrategy(probs=inv / inv.sum(), kind="reverse")


def keep_prob(mu_j: float, q: float) -> float:
    """Keep probability mu_j**q for a pseudo-labeled sample of class j.

    q tunes re-sampling strength: q = 0 keeps everything (0**0 defined as 1),
    q = 1 matches the labeled-data sampling probability.
    """
    if not 0.0 <= mu_j <= 1.0:
        raise ValueError(f"mu_j must be a probability, got {mu_j}")
    if q < 0.0:
        raise ValueError(f"q must be non-negative, got {q}")
    if q == 0.0:
        return 1.0
    return float(mu_j) ** float(q)


def bis_blend(alpha: float, a: SamplerStrategy, b: SamplerStrategy) -> SamplerStrategy:
    """Convex combination mu_j = alpha * mu_Aj + (1 - alpha) * mu_Bj."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if len(a) != len(b):
        raise ValueError("cannot blend strategies over different class counts")
    # Endpoints must reproduce the input strategies bit for bit.
    if alpha == 1.0:
        return SamplerStrategy(probs=a.probs.copy(), kind="blended")
    if alpha == 0.0:
        return SamplerStrategy(probs=b.probs.copy(), kind="blended")
    # A convex combination of vectors summing to 1 sums to 1; no renormalization.
    probs = alpha * a.probs + (1.0 - alpha) * b.probs
    return SamplerStrategy(probs=probs, kind="blended")


def alpha_at(schedule: BisSchedule, t: int) -> float:
    """Blend weight at epoch t: equal 0.5; linear 1 - t/t_max;
    cosine cos(t/t_max * pi/2); parabolic 1 - (t/t_max)**2."""
    if t < 0 or t > schedule.t_max:
        raise ValueError(f"epoch {t} outside [0, {schedule.t_max}]")
    if schedule.kind == "equal":
        return 0.5
    if t == schedule.t_max:
        return 0.0  # exact endpoint; cos(pi/2) would leave ~6e-17 dust
    frac = t / schedule.t_max
    if schedule.kind == "linear":
        alpha = 1.0 - frac
    elif schedule.kind == "cosine":
        alpha = math.cos(frac * math.pi / 2.0)
    else:  # parabolic
        alpha = 1.0 - frac * frac
    return min(1.0, max(0.0, alpha))


def strategy_at(schedule: BisSchedule, t: int) -> SamplerStrategy:
    """Blended strategy in effect at epoch t."""
    return bis_blend(alpha_at(schedule, t), schedule.sampler_a, schedule.sampler_b)


def draw_class(strategy: SamplerStrategy, rng: np.random.Generator) -> int:
    """Draw one class index j with probability mu_j (inverse-CDF lookup)."""
    return int(draw_classes(strategy, rng, 1)[0])


def draw_classes(strategy: SamplerStrategy, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized draw of `size` class indices from the strategy.

    Inverse CDF over the cumulative-sum table; a draw landing exactly on a
    boundary resolves to the lower class index.
    """
    cdf = np.cumsum(strategy.probs)
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="left")
    return np.minimum(idx, len(strategy) - 1)


def build_strategy(kind: str, counts) -> SamplerStrategy:
    """Resolve a strategy name (random/mean/reverse) against class counts."""
    if kind == "random":
        return random_probs(counts)
    if kind == "mean":
        return mean_probs(len(np.asarray(counts)))
    if kind == "reverse":
        return reverse_probs(counts)
    raise ValueError(f"unknown sampler kind {kind!r}")
