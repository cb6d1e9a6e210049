"""Binary images, DNA sequences, seeded corruption and synthetic datasets.

All randomness goes through :func:`make_rng`, a Philox-4x64 counter-based
generator from numpy, so every output is fully determined by its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelModel

DNA = "ACGT"
_DNA_INDEX = {c: i for i, c in enumerate(DNA)}


class FormatError(ValueError):
    pass


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


# -- PBM -----------------------------------------------------------------------


@dataclass
class BinaryImage:
    bits: np.ndarray  # (H, W) uint8, 1 = black

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


def _pbm_tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens and the offset after them."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and (data[pos : pos + 1].isspace() or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise FormatError("truncated PBM header")
        tokens.append(data[start:pos].decode("ascii"))
    return tokens, pos


def parse_pbm(data: bytes) -> BinaryImage:
    magic, pos = _pbm_tokens(data, 1)
    if magic[0] not in ("P1", "P4"):
        raise FormatError(f"not a PBM file (magic {magic[0]!r})")
    tokens, pos = _pbm_tokens(data, 3)
    try:
        width, height = int(tokens[1]), int(tokens[2])
    except ValueError as exc:
        raise FormatError("malformed PBM dimensions") from exc
    if width <= 0 or height <= 0:
        raise FormatError("PBM dimensions must be positive")
    if magic[0] == "P1":
        stripped = b"".join(line.split(b"#")[0] for line in data[pos:].splitlines())
        body = bytes(c for c in stripped if c in b"01")
        if len(body) < width * height:
            raise FormatError("truncated PBM payload")
        bits = np.frombuffer(body[: width * height], dtype=np.uint8) - ord("0")
        return BinaryImage(bits.reshape(height, width).copy())
    payload = data[pos + 1 :]  # single whitespace after the header
    row_bytes = (width + 7) // 8
    if len(payload) < row_bytes * height:
        raise FormatError("truncated PBM payload")
    raw = np.frombuffer(payload[: row_bytes * height], dtype=np.uint8).reshape(height, row_bytes)
    bits = np.unpackbits(raw, axis=1)[:, :width]
    return BinaryImage(bits.copy())


def load_pbm(path) -> BinaryImage:
    return parse_pbm(Path(path).read_bytes())


def format_pbm(image: BinaryImage, plain: bool = False) -> bytes:
    bits = np.asarray(image.bits, dtype=np.uint8)
    h, w = bits.shape
    if plain:
        lines = [f"P1\n{w} {h}"] + [" ".join(str(int(b)) for b in row) for row in bits]
        return ("\n".join(lines) + "\n").encode("ascii")
    return f"P4\n{w} {h}\n".encode("ascii") + np.packbits(bits, axis=1).tobytes()


def save_pbm(image: BinaryImage, path, plain: bool = False) -> None:
    Path(path).write_bytes(format_pbm(image, plain))


# -- FASTA ---------------------------------------------------------------------


@dataclass
class ReferenceSequence:
    symbols: np.ndarray  # uint8 indices into ACGT
    label: str = "ref"

    def __post_init__(self):
        if len(self.symbols) == 0:
            raise ValueError("reference sequence must be non-empty")


@dataclass
class ReadSet:
    reads: np.ndarray  # (count, read_len) uint8
    ids: list = field(default_factory=list)
    offsets: np.ndarray | None = None

    def __post_init__(self):
        if not self.ids:
            self.ids = [f"r{i + 1}" for i in range(len(self.reads))]


def dna_to_indices(text: str) -> np.ndarray:
    out = np.empty(len(text), dtype=np.uint8)
    for i, ch in enumerate(text.upper()):
        try:
            out[i] = _DNA_INDEX[ch]
        except KeyError:
            raise FormatError(f"invalid base {ch!r} at position {i + 1}") from None
    return out


def indices_to_dna(symbols) -> str:
    return "".join(DNA[int(s)] for s in symbols)


def parse_fasta(text: str) -> list[tuple[str, np.ndarray]]:
    records, name, chunks = [], None, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            if name is not None:
                records.append((name, "".join(chunks)))
            name, chunks = line[1:].strip(), []
        elif name is None:
            raise FormatError(f"line {lineno}: sequence data before any '>' header")
        else:
            chunks.append(line)
    if name is not None:
        records.append((name, "".join(chunks)))
    out = []
    for name, seq in records:
        try:
            out.append((name, dna_to_indices(seq)))
        except FormatError as exc:
            raise FormatError(f"record {name!r}: {exc}") from None
    return out


def load_fasta(path) -> list[tuple[str, np.ndarray]]:
    return parse_fasta(Path(path).read_text())


def format_fasta(records, width: int = 0) -> str:
    lines = []
    for name, seq in records:
        lines.append(f">{name}")
        s = indices_to_dna(seq)
        if width:
            lines += [s[i : i + width] for i in range(0, len(s), width)] or [""]
        else:
            lines.append(s)
    return "\n".join(lines) + ("\n" if lines else "")


def save_fasta(records, path, width: int = 0) -> None:
    Path(path).write_text(format_fasta(records, width))


def load_reads(path) -> ReadSet:
    records = load_fasta(path)
    lengths = {len(s) for _, s in records}
    if len(lengths) > 1:
        raise FormatError(f"{path}: reads have differing lengths {sorted(lengths)}")
    reads = np.stack([s for _, s in records]) if records else np.empty((0, 0), dtype=np.uint8)
    return ReadSet(reads, [n for n, _ in records])


def save_reads(reads: ReadSet, path) -> None:
    save_fasta(list(zip(reads.ids, reads.reads)), path)


# -- noise and synthetic data --------------------------------------------------


def corrupt(symbols, ch: ChannelModel, seed) -> np.ndarray:
    """Pass every symbol independently through the channel."""
    x = np.asarray(symbols)
    if x.size and (x.min() < 0 or x.max() >= ch.x_size):
        raise ValueError("symbol outside channel input alphabet")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    cum = np.cumsum(ch.pi, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(x.shape)
    z = (u[..., None] >= cum[x]).sum(axis=-1)
    return z.astype(x.dtype if x.dtype.kind in "ui" else np.int64)


def mutate_reference(ref: ReferenceSequence, rate: float, seed) -> ReferenceSequence:
    """Substitute each base w.p. ``rate`` by one of the three other bases."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("mutation rate must lie in [0, 1)")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    sym = ref.symbols.copy()
    hit = rng.random(len(sym)) < rate
    shift = rng.integers(1, 4, size=len(sym))
    sym[hit] = (sym[hit] + shift[hit]) % 4
    return ReferenceSequence(sym, ref.label)


def generate_reads(ref: ReferenceSequence, read_len: int = 200, count: int = 6000, seed=0) -> ReadSet:
    """Error-free reads copied from uniformly random forward-strand offsets."""
    n = len(ref.symbols)
    if read_len > n:
        raise ValueError(f"read length {read_len} exceeds reference length {n}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    offsets = rng.integers(0, n - read_len + 1, size=count)
    idx = offsets[:, None] + np.arange(read_len)[None, :]
    reads = ref.symbols[idx] if count else np.empty((0, read_len), dtype=np.uint8)
    return ReadSet(reads.astype(np.uint8), offsets=offsets)


def make_synthetic_reference(length: int, seed, model: str = "iid_uniform", stay_prob: float = 0.9,
                             label: str = "ref") -> ReferenceSequence:
    """``iid_uniform`` bases, or a ``markov`` chain that repeats with ``stay_prob``."""
    if length <= 0:
        raise ValueError("length must be positive")
    rng = make_rng(seed)
    if model == "iid_uniform":
        return ReferenceSequence(rng.integers(0, 4, size=length).astype(np.uint8), label)
    if model != "markov":
        raise ValueError(f"unknown reference model {model!r}")
    first = rng.integers(0, 4)
    change = rng.random(length - 1) >= stay_prob
    step = rng.integers(1, 4, size=length - 1) * change
    sym = (first + np.concatenate([[0], np.cumsum(step)])) % 4
    return ReferenceSequence(sym.astype(np.uint8), label)


def markov_binary(n: int, stay: float, seed) -> np.ndarray:
    """Symmetric binary Markov chain that keeps its state w.p. ``stay``."""
    rng = make_rng(seed)
    flips = rng.random(n) >= stay
    flips[0] = rng.random() < 0.5
    return (np.cumsum(flips) % 2).astype(np.uint8)


# -- synthetic pattern images --------------------------------------------------

PATTERNS = ("stripes", "checker", "halfplane", "glyphs", "blobs", "rings")


def pattern_image(kind: str, size: int = 64, seed=0) -> np.ndarray:
    """Small binary test rasters with spatial structure."""
    rng = make_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "stripes":
        period = int(rng.integers(6, 14))
        angle = rng.uniform(0, np.pi)
        t = xx * np.cos(angle) + yy * np.sin(angle)
        img = (t // (period / 2)) % 2
    elif kind == "checker":
        cell = int(rng.integers(5, 12))
        img = ((xx // cell) + (yy // cell)) % 2
    elif kind == "halfplane":
        a, b = rng.normal(size=2)
        c = rng.uniform(-0.3, 0.3) * size
        img = (a * (xx - size / 2) + b * (yy - size / 2) > c).astype(int)
    elif kind == "glyphs":
        img = np.zeros((size, size), dtype=int)
        cell = 8
        for r in range(1, size // cell - 1, 2):
            for c in range(1, size // cell - 1):
                glyph = rng.random((5, 4)) < 0.45
                r0, c0 = r * cell // 2 * 2, c * cell
                img[r0 : r0 + 5, c0 + 1 : c0 + 5] = glyph
    elif kind == "blobs":
        img = np.zeros((size, size), dtype=int)
        for _ in range(int(rng.integers(4, 9))):
            cy, cx = rng.uniform(0, size, size=2)
            rad = rng.uniform(size / 16, size / 5)
            img |= ((yy - cy) ** 2 + (xx - cx) ** 2 < rad**2).astype(int)
    elif kind == "rings":
        cy, cx = rng.uniform(size / 3, 2 * size / 3, size=2)
        width = rng.uniform(3, 7)
        img = (np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2) // width) % 2
    else:
        raise ValueError(f"unknown pattern {kind!r}")
    return np.asarray(img, dtype=np.uint8)


def pattern_corpus(kinds, size: int, seed) -> list[np.ndarray]:
    rng = make_rng(seed)
    return [pattern_image(k, size, int(rng.integers(2**63))) for k in kinds]


# -- provenance -----------------------------------------------------------------


def write_manifest_sidecar(out_path, channel_spec: str, seed) -> Path:
    side = Path(str(out_path) + ".corruption.txt")
    side.write_text(f"channel={channel_spec}\nseed={seed}\n")
    return side
