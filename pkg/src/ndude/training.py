"""Training regimes for the sliding-window networks.

Every regime reduces to the same loop: integer context windows, a per-sample
row index, and a target table whose selected row is the soft label. Windows
are one-hot encoded one mini-batch at a time.

=============  ===========================  ====================================
regime         row index                    target table
=============  ===========================  ====================================
pseudo/ft      noisy symbol z               L_new (full) or stacked L_new,z rows
supervised     x * |Z| + z                  L_true (full) or one-hot/all-ones
vanilla SL     clean symbol x               identity (one-hot)
=============  ===========================  ====================================
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelModel, LossModel, SingletDenoiserSet, build_qsc, pseudo_labels, true_labels
from .context import ContextSpec, encode_batch, windows
from .data import corrupt, make_rng
from .denoiser import sl_windows
from .nn import AdamState, MlpModel, adam_step, backward, forward, soft_cross_entropy

log = logging.getLogger(__name__)

MODES = ("pseudo", "sup", "sup-blind", "ft", "sl")


@dataclass
class TrainingConfig:
    mode: str = "pseudo"
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0
    blind_delta_range: tuple[float, float] | None = None
    blind_redraw: str = "epoch"  # or "batch"
    regen_pairs: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.mode == "sup-blind":
            if self.blind_delta_range is None:
                raise ValueError("sup-blind training needs blind_delta_range")
            lo, hi = self.blind_delta_range
            if not 0.0 <= lo <= hi:
                raise ValueError(f"invalid blind range {self.blind_delta_range}")
        if self.blind_redraw not in ("epoch", "batch"):
            raise ValueError("blind_redraw must be 'epoch' or 'batch'")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class EpochLog:
    epoch: int
    objective: float
    wall_seconds: float


@dataclass
class SupervisedPairs:
    """Aligned windows, clean symbols and noisy center symbols."""

    windows: np.ndarray
    clean: np.ndarray
    noisy: np.ndarray

    def __len__(self):
        return len(self.clean)


def write_log(entries: Sequence[EpochLog], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "objective", "wall_seconds"])
        for e in entries:
            w.writerow([e.epoch, repr(e.objective), f"{e.wall_seconds:.3f}"])


# -- target tables ------------------------------------------------------------


def pseudo_target_table(model: MlpModel, ch: ChannelModel, loss: LossModel) -> np.ndarray:
    s_set = SingletDenoiserSet(ch.z_size, loss.lam.shape[1])
    labels = pseudo_labels(ch, loss, s_set)
    if model.head.kind == "full":
        return np.asarray(labels.l_new)
    if model.head.kind == "reduced":
        return labels.reduced_targets()
    raise ValueError("pseudo-label training needs a full or reduced head")


def supervised_target_table(model: MlpModel, loss: LossModel) -> np.ndarray:
    zs, xs = model.head.z_size, model.head.xhat_size
    if model.head.kind == "full":
        return np.asarray(true_labels(loss, SingletDenoiserSet(zs, xs), zs).l_true)
    if model.head.kind == "reduced":
        x_size = loss.lam.shape[0]
        table = np.ones((x_size * zs, zs, xs))
        for x in range(x_size):
            for z in range(zs):
                table[x * zs + z, z] = 0.0
                table[x * zs + z, z, x] = 1.0
        return table.reshape(x_size * zs, zs * xs)
    raise ValueError("use train_vanilla_sl for a direct head")


# -- core loop ------------------------------------------------------------------


def _check_model(model: MlpModel, context_len: int):
    expected = context_len * model.head.z_size
    if model.layer_dims[0] != expected:
        raise ValueError(f"model input {model.layer_dims[0]} incompatible with windows ({expected})")


def fit(
    model: MlpModel,
    batches: Callable[[int, np.random.Generator], tuple[np.ndarray, np.ndarray]],
    table: np.ndarray,
    config: TrainingConfig,
) -> list[EpochLog]:
    """Mini-batch Adam on ``model`` in place.

    ``batches(epoch, rng)`` returns ``(windows, rows)`` for one epoch; the
    targets of a batch are ``table[rows]``.
    """
    rng = make_rng([config.seed, 0x7EA1])
    state = AdamState.for_model(model, config.learning_rate)
    zs = model.head.z_size
    history = []
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        win, rows = batches(epoch, rng)
        _check_model(model, win.shape[1])
        order = rng.permutation(len(rows))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            x = encode_batch(win[idx], zs)
            g = table[rows[idx]]
            p, cache = forward(model, x)
            total += soft_cross_entropy(g, p)
            adam_step(model, state, backward(model, cache, g))
        obj = total / max(len(order), 1)
        history.append(EpochLog(epoch + 1, obj, time.perf_counter() - t0))
        log.info("epoch %d objective %.6f", epoch + 1, obj)
    return history


def stack_windows(data: Sequence[np.ndarray], context: ContextSpec, with_center: bool = False):
    wins, syms = [], []
    for arr in data:
        arr = np.asarray(arr)
        wins.append(sl_windows(arr, context) if with_center else windows(arr, context))
        syms.append(arr.reshape(-1))
    return np.concatenate(wins), np.concatenate(syms).astype(np.int64)


def make_pairs(clean: Sequence[np.ndarray], ch: ChannelModel, context: ContextSpec, rng,
               with_center: bool = False) -> SupervisedPairs:
    """Corrupt each clean array through ``ch`` and collect (window, x, z) triples."""
    noisy = [corrupt(c, ch, rng) for c in clean]
    win, z = stack_windows(noisy, context, with_center)
    x = np.concatenate([np.asarray(c).reshape(-1) for c in clean]).astype(np.int64)
    return SupervisedPairs(win, x, z)


def _as_list(data) -> list:
    if isinstance(data, np.ndarray):
        return [data]
    return list(data)


# -- regimes ----------------------------------------------------------------------


def train_pseudo(noisy, ch: ChannelModel, loss: LossModel, config: TrainingConfig, init: MlpModel):
    """Adaptive training on noisy data only; returns ``(model, log)``.

    The targets are rows of the pseudo-label table chosen by the noisy
    center symbol; the clean data never enters this function.
    """
    model = init.copy()
    if model.head.z_size != ch.z_size:
        raise ValueError("model alphabet does not match channel")
    win, z = stack_windows(_as_list(noisy), model.context)
    table = pseudo_target_table(model, ch, loss)
    history = fit(model, lambda e, r: (win, z), table, config)
    if config.epochs:
        model.provenance = "ft" if init.provenance in ("sup", "sup-blind", "ft") else "rand"
    return model, history


def finetune(init: MlpModel, noisy, ch_true: ChannelModel, loss: LossModel, config: TrainingConfig):
    """Pseudo-label training starting from pre-trained weights (fresh Adam moments)."""
    if init.head.kind == "direct":
        raise ValueError("a direct-mapping model cannot be fine-tuned")
    model, history = train_pseudo(noisy, ch_true, loss, config, init)
    if config.epochs:
        model.provenance = "ft"
    return model, history


def train_supervised(pairs, loss: LossModel, config: TrainingConfig, init: MlpModel):
    """Supervised pre-training from clean/noisy pairs.

    ``pairs`` is a :class:`SupervisedPairs` or a callable ``(epoch, rng) ->
    SupervisedPairs`` that regenerates them.
    """
    model = init.copy()
    zs = model.head.z_size
    table = supervised_target_table(model, loss)

    def batches(epoch, rng):
        p = pairs(epoch, rng) if callable(pairs) else pairs
        if p.clean.size and (p.clean.max() >= loss.lam.shape[0] or p.noisy.max() >= zs):
            raise ValueError("pair symbols outside the model alphabets")
        return p.windows, p.clean * zs + p.noisy

    history = fit(model, batches, table, config)
    if config.epochs:
        model.provenance = "sup-blind" if config.mode == "sup-blind" else "sup"
    return model, history


def supervised_from_clean(clean, ch: ChannelModel, context: ContextSpec, config: TrainingConfig,
                          with_center: bool = False):
    """Pair source for clean corpora: fixed pairs, or fresh corruption per epoch."""
    clean = _as_list(clean)
    if config.regen_pairs:
        return lambda epoch, rng: make_pairs(clean, ch, context, rng, with_center)
    return make_pairs(clean, ch, context, make_rng([config.seed, 0xDA7A]), with_center)


def train_supervised_blind(clean, alphabet_size: int, delta_range, loss: LossModel, config: TrainingConfig,
                           init: MlpModel):
    """One model over a range of symmetric-channel noise levels.

    A fresh ``delta ~ U[lo, hi]`` is drawn per epoch (or per batch with
    ``blind_redraw='batch'``) and the clean corpus is re-corrupted with it.
    ``clean`` may be a callable ``rng -> list of arrays`` that resamples the
    corpus itself on every draw (epoch redraw only).
    """
    lo, hi = delta_range
    limit = (alphabet_size - 1) / alphabet_size
    if not 0.0 <= lo <= hi < limit:
        raise ValueError(f"invalid blind delta range {delta_range}")
    if callable(clean) and config.blind_redraw == "batch":
        raise ValueError("per-batch redraw needs a fixed clean corpus")
    model = init.copy()
    zs = model.head.z_size
    table = supervised_target_table(model, loss)
    noise_rng = make_rng([config.seed, 0xB11D])
    deltas = []

    def draw():
        d = float(noise_rng.uniform(lo, hi))
        deltas.append(d)
        corpus = clean(noise_rng) if callable(clean) else _as_list(clean)
        p = make_pairs(corpus, build_qsc(alphabet_size, d), model.context, noise_rng)
        return p.windows, p.clean * zs + p.noisy

    if config.blind_redraw == "epoch":
        history = fit(model, lambda epoch, rng: draw(), table, config)
    else:
        history = _fit_batch_redraw(model, draw, table, config)
    if config.epochs:
        model.provenance = "sup-blind"
    log.info("blind deltas drawn: %s", [round(d, 4) for d in deltas])
    return model, history


def _fit_batch_redraw(model, draw, table, config):
    rng = make_rng([config.seed, 0x7EA1])
    state = AdamState.for_model(model, config.learning_rate)
    zs = model.head.z_size
    history, t0 = [], time.perf_counter()
    for epoch in range(config.epochs):
        n = len(draw()[1])
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            win, rows = draw()
            xb = encode_batch(win[idx], zs)
            g = table[rows[idx]]
            p, cache = forward(model, xb)
            total += soft_cross_entropy(g, p)
            adam_step(model, state, backward(model, cache, g))
        history.append(EpochLog(epoch + 1, total / max(n, 1), time.perf_counter() - t0))
    return history


def train_vanilla_sl(pairs, config: TrainingConfig, init: MlpModel):
    """Direct mapping (context + center) -> clean symbol with one-hot targets.

    ``pairs`` must carry windows built with the center symbol appended.
    """
    model = init.copy()
    if model.head.kind != "direct":
        raise ValueError("vanilla SL needs a direct head")
    table = np.eye(model.head.xhat_size)

    def batches(epoch, rng):
        p = pairs(epoch, rng) if callable(pairs) else pairs
        return p.windows, p.clean

    history = fit(model, batches, table, config)
    if config.epochs:
        model.provenance = "sl"
    return model, history
