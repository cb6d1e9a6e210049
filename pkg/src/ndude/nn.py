"""Fully-connected ReLU network with grouped softmax heads, written in numpy.

Three head layouts are supported:

* ``full``    -- one softmax over all |X_hat|^|Z| singlet denoisers
* ``reduced`` -- |Z| independent softmax groups of size |X_hat|
* ``direct``  -- one softmax over |X_hat| (the plain supervised mapping, whose
  input also carries the center symbol)

The objective for a target ``g`` (non-negative, not necessarily normalized)
is ``-sum_i g_i log p_i`` summed over all groups and averaged over the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .context import ContextSpec

FORMAT_NAME = "ndude-checkpoint"
FORMAT_VERSION = 1
LOG_CLAMP = 1e-12
PROVENANCE = ("rand", "sup", "sup-blind", "ft", "sl")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class Head:
    kind: str  # "full", "reduced" or "direct"
    z_size: int
    xhat_size: int

    def __post_init__(self):
        if self.kind not in ("full", "reduced", "direct"):
            raise ValueError(f"unknown head kind {self.kind!r}")

    @property
    def groups(self) -> int:
        return self.z_size if self.kind == "reduced" else 1

    @property
    def group_size(self) -> int:
        return self.xhat_size**self.z_size if self.kind == "full" else self.xhat_size

    @property
    def width(self) -> int:
        return self.groups * self.group_size

    def __str__(self):
        if self.kind == "full":
            return f"Full({self.width})"
        if self.kind == "reduced":
            return f"Reduced({self.z_size},{self.xhat_size})"
        return f"Direct({self.xhat_size})"


@dataclass
class MlpModel:
    weights: list  # weights[l] has shape (fan_in, fan_out)
    biases: list
    head: Head
    context: ContextSpec
    provenance: str = "rand"
    seed: int = 0

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MlpModel":
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head,
            self.context,
            self.provenance,
            self.seed,
        )


def input_dim(context: ContextSpec, head: Head) -> int:
    cells = context.length + (1 if head.kind == "direct" else 0)
    return cells * head.z_size


def he_init(layer_dims, seed: int, head: Head, context: ContextSpec) -> MlpModel:
    """Weights ~ N(0, 2 / fan_in), zero biases."""
    layer_dims = list(layer_dims)
    if len(layer_dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    if layer_dims[0] != input_dim(context, head):
        raise ValueError(f"input dim {layer_dims[0]} != {input_dim(context, head)} for {context}")
    if layer_dims[-1] != head.width:
        raise ValueError(f"output dim {layer_dims[-1]} != head width {head.width}")
    rng = np.random.Generator(np.random.Philox(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases, head, context, "rand", seed)


def build_model(hidden, seed: int, head: Head, context: ContextSpec) -> MlpModel:
    dims = [input_dim(context, head), *hidden, head.width]
    return he_init(dims, seed, head, context)


def _softmax_groups(logits: np.ndarray, head: Head) -> np.ndarray:
    z = logits.reshape(len(logits), head.groups, head.group_size)
    z = z - z.max(axis=2, keepdims=True)
    e = np.exp(z)
    return (e / e.sum(axis=2, keepdims=True)).reshape(logits.shape)


def forward(model: MlpModel, x: np.ndarray):
    """Return ``(probs, cache)``; ``x`` is (batch, input_dim) or a single vector."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.layer_dims[0]:
        raise ValueError(f"input has {x.shape[1]} features, model expects {model.layer_dims[0]}")
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
            acts.append(h)
    probs = _softmax_groups(h, model.head)
    cache = (acts, probs)
    return (probs[0] if single else probs), cache


def predict(model: MlpModel, x: np.ndarray, batch: int = 8192) -> np.ndarray:
    out = [forward(model, x[i : i + batch])[0] for i in range(0, len(x), batch)]
    return np.concatenate(out) if out else np.empty((0, model.head.width))


def soft_cross_entropy(g, p) -> float:
    """``-sum g * log(max(p, 1e-12))`` for one target (or summed over a batch)."""
    g = np.asarray(g, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if g.shape != p.shape:
        raise ValueError("target and probabilities differ in shape")
    if np.any(g < 0):
        raise ValueError("targets must be non-negative")
    return float(-(g * np.log(np.maximum(p, LOG_CLAMP))).sum())


def objective(model: MlpModel, x: np.ndarray, g: np.ndarray) -> float:
    """Mean soft cross-entropy over a batch."""
    p, _ = forward(model, x)
    return soft_cross_entropy(g, p) / len(x)


def backward(model: MlpModel, cache, g: np.ndarray) -> list[np.ndarray]:
    """Gradients of :func:`objective`, ordered like :meth:`MlpModel.params`."""
    acts, probs = cache
    g = np.asarray(g, dtype=np.float64).reshape(probs.shape)
    n = len(probs)
    head = model.head
    pg = probs.reshape(n, head.groups, head.group_size)
    gg = g.reshape(n, head.groups, head.group_size)
    delta = (pg * gg.sum(axis=2, keepdims=True) - gg).reshape(n, -1) / n
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return [p for pair in zip(grads_w, grads_b) for p in pair]


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_model(cls, model: MlpModel, lr: float = 1e-3) -> "AdamState":
        params = model.params()
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(model: MlpModel, state: AdamState, grads: list[np.ndarray]) -> None:
    """In-place bias-corrected Adam update of ``model`` and ``state``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(model.params(), grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError("gradient shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# -- checkpoints --------------------------------------------------------------


def save_model(model: MlpModel, path) -> None:
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "head": {"kind": model.head.kind, "z_size": model.head.z_size, "xhat_size": model.head.xhat_size},
        "head_label": str(model.head),
        "context": str(model.context),
        "layer_dims": model.layer_dims,
        "provenance": model.provenance,
        "seed": model.seed,
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()} for w, b in zip(model.weights, model.biases)
        ],
    }
    # json writes floats with the shortest repr that round-trips exactly
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> MlpModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path}: not an {FORMAT_NAME} file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format_version {doc.get('format_version')}")
    try:
        h = doc["head"]
        head = Head(h["kind"], int(h["z_size"]), int(h["xhat_size"]))
        context = ContextSpec.parse(doc["context"])
        weights = [np.array(layer["weight"], dtype=np.float64) for layer in doc["layers"]]
        biases = [np.array(layer["bias"], dtype=np.float64) for layer in doc["layers"]]
        model = MlpModel(weights, biases, head, context, doc["provenance"], int(doc["seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if model.layer_dims != doc["layer_dims"] or model.layer_dims[-1] != head.width:
        raise CheckpointError(f"{path}: layer dims inconsistent with stored arrays")
    return model
