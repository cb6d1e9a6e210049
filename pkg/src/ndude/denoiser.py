"""Reconstruction rules: count-based DUDE and neural sliding-window denoisers.

Ties in every argmin/argmax resolve to the lowest index, so reconstructions
are bit-reproducible for a fixed model and input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel, LossModel, SingletDenoiserSet, pseudo_labels
from .context import ContextSpec, ContextWindow, encode_batch, interior_mask_1d, windows
from .nn import MlpModel, predict


class ModelMismatchError(ValueError):
    pass


@dataclass
class Reconstruction:
    symbols: np.ndarray  # same shape as the noisy input
    singlets: np.ndarray  # chosen singlet index per position (same shape)


@dataclass
class ContextLossTable:
    """Per distinct context: noisy-symbol counts and the summed estimated loss rows."""

    contexts: np.ndarray  # (m, window length), PAD = -1
    counts: np.ndarray  # (m, |Z|)
    loss_sums: np.ndarray  # (m, |S|) == counts @ L
    inverse: np.ndarray  # row of each contributing position

    def lookup(self, window: ContextWindow) -> np.ndarray | None:
        row = np.array([-1 if s is None else s for s in window.symbols], dtype=self.contexts.dtype)
        hit = np.nonzero((self.contexts == row).all(axis=1))[0]
        return self.loss_sums[hit[0]] if len(hit) else None


def context_ids(win: np.ndarray, z_size: int):
    """Unique context rows and the id of every row (ids follow sorted order)."""
    base = z_size + 1
    length = win.shape[1]
    if length * np.log2(base) < 62:
        key = ((win.astype(np.int64) + 1) * base ** np.arange(length, dtype=np.int64)).sum(axis=1)
        _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
        return win[first], inverse.reshape(-1)
    uniq, inverse = np.unique(win, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def build_context_table(win: np.ndarray, z: np.ndarray, z_size: int, l: np.ndarray) -> ContextLossTable:
    uniq, inverse = context_ids(win, z_size)
    counts = np.zeros((len(uniq), z_size))
    np.add.at(counts, (inverse, z), 1.0)
    return ContextLossTable(uniq, counts, counts @ l, inverse)


def dude_denoise(noisy, ch: ChannelModel, loss: LossModel, context: ContextSpec) -> Reconstruction:
    """Two-pass DUDE in estimated-loss form.

    1-D positions whose window leaves the sequence are copied unchanged;
    2-D windows are zero-padded, so every pixel is denoised.
    """
    noisy = np.asarray(noisy)
    s_set = SingletDenoiserSet(ch.z_size, loss.lam.shape[1])
    tab = s_set.table()
    l = pseudo_labels(ch, loss, s_set).l
    z = noisy.reshape(-1).astype(np.int64)
    win = windows(noisy, context)
    if context.kind == "1d":
        active = interior_mask_1d(noisy, context.size)
    else:
        active = np.ones(len(z), dtype=bool)
    singlets = np.full(len(z), s_set.identity_index(), dtype=np.int64)
    if active.any():
        table = build_context_table(win[active], z[active], ch.z_size, l)
        best = np.argmin(table.loss_sums, axis=1)
        singlets[active] = best[table.inverse]
    out = tab[singlets, z]
    return Reconstruction(out.reshape(noisy.shape).astype(noisy.dtype), singlets.reshape(noisy.shape))


def _check(model: MlpModel, kind: str, context: ContextSpec | None):
    if model.head.kind != kind:
        raise ModelMismatchError(f"model has a {model.head.kind} head, expected {kind}")
    if context is not None and context != model.context:
        raise ModelMismatchError(f"model context {model.context} does not match {context}")


def _probs(model: MlpModel, win: np.ndarray, chunk: int = 65536) -> np.ndarray:
    out = []
    for i in range(0, len(win), chunk):
        out.append(predict(model, encode_batch(win[i : i + chunk], model.head.z_size)))
    return np.concatenate(out) if out else np.empty((0, model.head.width))


def ndude_infer_full(model: MlpModel, noisy, context: ContextSpec | None = None) -> Reconstruction:
    _check(model, "full", context)
    noisy = np.asarray(noisy)
    z = noisy.reshape(-1).astype(np.int64)
    if z.size and z.max() >= model.head.z_size:
        raise ModelMismatchError("noisy symbol outside the model's alphabet")
    p = _probs(model, windows(noisy, model.context))
    singlets = np.argmax(p, axis=1)
    tab = SingletDenoiserSet(model.head.z_size, model.head.xhat_size).table()
    out = tab[singlets, z]
    return Reconstruction(out.reshape(noisy.shape).astype(noisy.dtype), singlets.reshape(noisy.shape))


def ndude_infer_reduced(model: MlpModel, noisy, context: ContextSpec | None = None) -> Reconstruction:
    _check(model, "reduced", context)
    noisy = np.asarray(noisy)
    z = noisy.reshape(-1).astype(np.int64)
    if z.size and z.max() >= model.head.z_size:
        raise ModelMismatchError("noisy symbol outside the model's alphabet")
    zs, xs = model.head.z_size, model.head.xhat_size
    p = _probs(model, windows(noisy, model.context)).reshape(-1, zs, xs)
    choice = np.argmax(p, axis=2)  # per-group argmax == the implied singlet
    singlets = (choice * xs ** np.arange(zs)[None, :]).sum(axis=1)
    out = choice[np.arange(len(z)), z]
    return Reconstruction(out.reshape(noisy.shape).astype(noisy.dtype), singlets.reshape(noisy.shape))


def sl_windows(noisy, context: ContextSpec) -> np.ndarray:
    """Context windows with the center symbol appended as a final cell."""
    noisy = np.asarray(noisy)
    win = windows(noisy, context)
    return np.concatenate([win, noisy.reshape(-1, 1).astype(win.dtype)], axis=1)


def sl_infer(model: MlpModel, noisy, context: ContextSpec | None = None) -> Reconstruction:
    _check(model, "direct", context)
    noisy = np.asarray(noisy)
    p = _probs(model, sl_windows(noisy, model.context))
    out = np.argmax(p, axis=1)
    return Reconstruction(out.reshape(noisy.shape).astype(noisy.dtype), np.full(noisy.shape, -1))


def denoise_with_model(model: MlpModel, noisy) -> Reconstruction:
    infer = {"full": ndude_infer_full, "reduced": ndude_infer_reduced, "direct": sl_infer}
    return infer[model.head.kind](model, noisy)
