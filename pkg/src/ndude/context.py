"""Sliding-window contexts around each noisy symbol.

Batch functions return integer arrays with ``PAD = -1`` marking positions
that fall outside the data. Scan order: 1-D windows list the left half
oldest-first then the right half; 2-D windows are the row-major patch with
the center cell skipped.

Array conventions for 1-D contexts: a 1-D array is one sequence, a 2-D
array is a stack of independent equal-length sequences (e.g. reads). For
2-D contexts the array is a single image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAD = -1


@dataclass(frozen=True)
class ContextSpec:
    kind: str  # "1d" or "2d"
    size: int  # k for 1d, ell for 2d

    def __post_init__(self):
        if self.kind == "1d":
            if self.size < 0:
                raise ValueError("k must be >= 0")
        elif self.kind == "2d":
            if self.size < 3 or self.size % 2 == 0:
                raise ValueError(f"2-D patch side must be odd and >= 3, got {self.size}")
        else:
            raise ValueError(f"unknown context kind {self.kind!r}")

    @property
    def length(self) -> int:
        return 2 * self.size if self.kind == "1d" else self.size**2 - 1

    @classmethod
    def parse(cls, text: str) -> "ContextSpec":
        """Parse ``1d:<k>`` or ``2d:<ell>``."""
        kind, _, size = text.partition(":")
        try:
            return cls(kind, int(size))
        except ValueError as exc:
            raise ValueError(f"bad context spec {text!r}: {exc}") from exc

    def __str__(self):
        return f"{self.kind}:{self.size}"


@dataclass(frozen=True)
class ContextWindow:
    spec: ContextSpec
    symbols: tuple  # alphabet indices, None for padding

    def __post_init__(self):
        if len(self.symbols) != self.spec.length:
            raise ValueError("window length does not match its kind")

    def key(self) -> bytes:
        return bytes(255 if s is None else s for s in self.symbols)


def extract_1d(sequence, i: int, k: int) -> ContextWindow:
    n = len(sequence)
    if not 0 <= i < n:
        raise IndexError(i)
    idx = list(range(i - k, i)) + list(range(i + 1, i + k + 1))
    syms = tuple(int(sequence[j]) if 0 <= j < n else None for j in idx)
    return ContextWindow(ContextSpec("1d", k), syms)


def extract_2d(image, r: int, c: int, ell: int) -> ContextWindow:
    spec = ContextSpec("2d", ell)
    image = np.asarray(image)
    h, w = image.shape
    if not (0 <= r < h and 0 <= c < w):
        raise IndexError((r, c))
    half = ell // 2
    syms = []
    for dr in range(-half, half + 1):
        for dc in range(-half, half + 1):
            if dr == 0 and dc == 0:
                continue
            rr, cc = r + dr, c + dc
            syms.append(int(image[rr, cc]) if 0 <= rr < h and 0 <= cc < w else None)
    return ContextWindow(spec, tuple(syms))


def encode(window: ContextWindow, z_size: int) -> np.ndarray:
    """One-hot blocks of size ``z_size``; padding encodes as an all-zero block."""
    out = np.zeros(len(window.symbols) * z_size)
    for pos, s in enumerate(window.symbols):
        if s is None:
            continue
        if not 0 <= s < z_size:
            raise ValueError(f"symbol {s} outside alphabet of size {z_size}")
        out[pos * z_size + s] = 1.0
    return out


# -- batch versions ---------------------------------------------------------


def windows_1d(data, k: int) -> np.ndarray:
    """All 1-D windows, shape (number of symbols, 2k)."""
    data = np.asarray(data)
    rows = data.reshape(1, -1) if data.ndim == 1 else data
    m, n = rows.shape
    padded = np.full((m, n + 2 * k), PAD, dtype=np.int16)
    padded[:, k : k + n] = rows
    offsets = [o for o in range(-k, k + 1) if o != 0]
    cols = np.arange(n)[:, None] + k + np.array(offsets, dtype=np.int64)[None, :]
    out = padded[:, cols] if k else np.empty((m, n, 0), dtype=np.int16)
    return out.reshape(m * n, 2 * k)


def interior_mask_1d(data, k: int) -> np.ndarray:
    """True where the whole 1-D window lies inside its sequence."""
    data = np.asarray(data)
    n = data.shape[-1]
    pos = np.arange(n)
    row = (pos >= k) & (pos < n - k)
    reps = 1 if data.ndim == 1 else data.shape[0]
    return np.tile(row, reps)


def windows_2d(image, ell: int) -> np.ndarray:
    """All zero-padded ``ell x ell`` windows of an image, shape (H*W, ell*ell - 1)."""
    ContextSpec("2d", ell)
    image = np.asarray(image)
    h, w = image.shape
    half = ell // 2
    padded = np.full((h + 2 * half, w + 2 * half), PAD, dtype=np.int16)
    padded[half : half + h, half : half + w] = image
    cols = []
    for dr in range(ell):
        for dc in range(ell):
            if dr == half and dc == half:
                continue
            cols.append(padded[dr : dr + h, dc : dc + w].reshape(-1))
    return np.stack(cols, axis=1)


def windows(data, spec: ContextSpec) -> np.ndarray:
    if spec.kind == "1d":
        return windows_1d(data, spec.size)
    return windows_2d(data, spec.size)


def encode_batch(win: np.ndarray, z_size: int) -> np.ndarray:
    """Vectorized :func:`encode` over rows of a window array."""
    n, length = win.shape
    out = np.zeros((n, length * z_size))
    r, c = np.nonzero(win >= 0)
    out[r, c * z_size + win[r, c]] = 1.0
    return out
