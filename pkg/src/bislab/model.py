"""Two-layer numpy classifier split into feature extractor and linear head.

features(x) = relu(w1 x + b1) is the extractor; (w2, b2) is the classifier.
Gradients are analytic (softmax cross-entropy backprop), updates are plain
SGD, and the extractor can be frozen for decoupled fine-tuning.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_HIDDEN = 64

PARAM_FIELDS = ("w1", "b1", "w2", "b2")

CHECKPOINT_MAGIC = b"BISLAB\x00\x01"


@dataclass
class MicroModel:
    w1: np.ndarray  # (hidden, dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (k, hidden)
    b2: np.ndarray  # (k,)
    features_frozen: bool = False

    def __post_init__(self):
        hidden, dim = self.w1.shape
        k = self.b2.shape[0]
        if self.b1.shape != (hidden,) or self.w2.shape != (k, hidden):
            raise ValueError("parameter shapes are inconsistent")
        for name in PARAM_FIELDS:
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")

    @property
    def dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def k(self) -> int:
        return self.b2.shape[0]


@dataclass
class GradientBundle:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


def init_model(dim: int, k: int, hidden: int = DEFAULT_HIDDEN,
               rng: np.random.Generator | None = None) -> MicroModel:
    """Uniform(-s, s) init with s = 1/sqrt(fan_in), drawn in field order."""
    if rng is None:
        rng = np.random.default_rng()
    s1 = 1.0 / np.sqrt(dim)
    s2 = 1.0 / np.sqrt(hidden)
    return MicroModel(
        w1=rng.uniform(-s1, s1, size=(hidden, dim)),
        b1=rng.uniform(-s1, s1, size=hidden),
        w2=rng.uniform(-s2, s2, size=(k, hidden)),
        b2=rng.uniform(-s2, s2, size=k),
    )


def clone_model(model: MicroModel) -> MicroModel:
    return MicroModel(
        w1=model.w1.copy(), b1=model.b1.copy(),
        w2=model.w2.copy(), b2=model.b2.copy(),
        features_frozen=model.features_frozen,
    )


def features(model: MicroModel, x: np.ndarray) -> np.ndarray:
    """Hidden representation relu(w1 x + b1); accepts a vector or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"expected feature dim {model.dim}, got {x.shape[-1]}")
    return np.maximum(x @ model.w1.T + model.b1, 0.0)


def _logits(model: MicroModel, x: np.ndarray) -> np.ndarray:
    return features(model, x) @ model.w2.T + model.b2


def predict_probs(model: MicroModel, x: np.ndarray) -> np.ndarray:
    """Softmax class probabilities, computed with max-subtraction."""
    logits = _logits(model, x)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def predict_labels(model: MicroModel, x: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest index."""
    return np.argmax(_logits(model, x), axis=-1)


def zero_grads(model: MicroModel) -> GradientBundle:
    return GradientBundle(
        w1=np.zeros_like(model.w1), b1=np.zeros_like(model.b1),
        w2=np.zeros_like(model.w2), b2=np.zeros_like(model.b2),
    )


def loss_and_grad(model: MicroModel, x: np.ndarray, targets: np.ndarray,
                  weights: np.ndarray) -> tuple[float, GradientBundle]:
    """Per-example-weighted cross-entropy and its analytic gradients.

    loss = (1/B) * sum_i weights_i * CE_i, normalized by the batch size B
    rather than the weight sum, so a 0/1 keep mask scales the term by the
    kept fraction (the FixMatch convention for the unlabeled loss).
    An empty batch yields (0, zero gradients).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    targets = np.asarray(targets, dtype=np.int64).ravel()
    weights = np.asarray(weights, dtype=np.float64).ravel()
    B = x.shape[0]
    if B == 0:
        return 0.0, zero_grads(model)
    if targets.shape[0] != B or weights.shape[0] != B:
        raise ValueError("batch, targets, and weights must have equal length")
    if np.any(targets < 0) or np.any(targets >= model.k):
        raise ValueError("target class out of range")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")

    h_pre = x @ model.w1.T + model.b1
    h = np.maximum(h_pre, 0.0)
    logits = h @ model.w2.T + model.b2
    m = logits.max(axis=1, keepdims=True)
    log_z = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    ce = log_z - logits[np.arange(B), targets]
    loss = float(np.dot(weights, ce) / B)

    probs = np.exp(logits - log_z[:, None])
    d_logits = probs
    d_logits[np.arange(B), targets] -= 1.0
    d_logits *= (weights / B)[:, None]

    g_w2 = d_logits.T @ h
    g_b2 = d_logits.sum(axis=0)
    d_h = d_logits @ model.w2
    d_h *= h_pre > 0.0
    g_w1 = d_h.T @ x
    g_b1 = d_h.sum(axis=0)
    return loss, GradientBundle(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)


def apply_update(model: MicroModel, grads: GradientBundle, lr: float) -> MicroModel:
    """SGD step in place: param -= lr * grad. Frozen extractors keep w1, b1."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if not model.features_frozen:
        model.w1 -= lr * grads.w1
        model.b1 -= lr * grads.b1
    model.w2 -= lr * grads.w2
    model.b2 -= lr * grads.b2
    return model


def add_scaled(into: GradientBundle, other: GradientBundle, scale: float) -> GradientBundle:
    """into += scale * other, reusing the arrays of `into`."""
    into.w1 += scale * other.w1
    into.b1 += scale * other.b1
    into.w2 += scale * other.w2
    into.b2 += scale * other.b2
    return into


def freeze_features(model: MicroModel) -> MicroModel:
    """Make w1/b1 immutable under apply_update. There is no unfreeze."""
    model.features_frozen = True
    return model


def feature_hash(model: MicroModel) -> str:
    """Hex digest over the extractor parameters; stable across processes."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(model.w1).tobytes())
    digest.update(np.ascontiguousarray(model.b1).tobytes())
    return digest.hexdigest()


def save_checkpoint(model: MicroModel, path) -> None:
    """Binary checkpoint: magic, u32 param count, then per parameter a
    u16 name length + utf-8 name + u8 ndim + u32 dims + float64-LE data."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(PARAM_FIELDS)))
        for name in PARAM_FIELDS:
            arr = np.ascontiguousarray(getattr(model, name), dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> MicroModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a model checkpoint: {path}")
        (count,) = struct.unpack("<I", fh.read(4))
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n_bytes = 8 * int(np.prod(shape)) if ndim else 8
            data = np.frombuffer(fh.read(n_bytes), dtype="<f8").reshape(shape)
            params[name] = data.astype(np.float64)
    missing = set(PARAM_FIELDS) - set(params)
    if missing:
        raise ValueError(f"checkpoint missing parameters: {sorted(missing)}")
    return MicroModel(**{name: params[name] for name in PARAM_FIELDS})
