"""Channel matrices, loss matrices and the estimated-loss / pseudo-label tables.

Symbols are always 0-based alphabet indices. A single-symbol ("singlet")
denoiser ``s: Z -> X_hat`` is identified with an integer ``j`` whose base-|X_hat|
digits give ``s(z)``; digit ``z`` (least significant first) is the image of ``z``.
For the binary case this yields the order always-0, flip, say-what-you-see,
always-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RANK_TOL = 1e-9


class ChannelError(ValueError):
    """Invalid channel parameters or a rank-deficient channel matrix."""


class SingularChannelError(ChannelError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def pseudo_inverse(m) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a full-row-rank matrix.

    Square input is inverted by Gauss-Jordan elimination with partial
    pivoting; a wide input uses ``m.T @ inv(m @ m.T)``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("pseudo_inverse expects a 2-D matrix")
    rows, cols = m.shape
    if rows > cols:
        raise SingularChannelError(f"{rows}x{cols} matrix cannot have full row rank")
    if rows == cols:
        return _gauss_jordan_inverse(m)
    return m.T @ _gauss_jordan_inverse(m @ m.T)


def _gauss_jordan_inverse(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    aug = np.hstack([a.astype(np.float64), np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) <= RANK_TOL:
            raise SingularChannelError("matrix is rank deficient (pivot below 1e-9)")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0.0:
                aug[r] -= aug[r, col] * aug[col]
    return aug[:, n:].copy()


@dataclass(frozen=True)
class ChannelModel:
    """A discrete memoryless channel ``pi[x, z] = P(Z=z | X=x)``."""

    pi: np.ndarray
    family: str = "general"  # "bsc", "qsc" or "general"
    delta: float | None = None
    pi_pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pi = _frozen(self.pi)
        if pi.ndim != 2:
            raise ChannelError("channel matrix must be 2-D")
        if np.any(pi < 0) or np.any(pi > 1):
            raise ChannelError("channel entries must lie in [0, 1]")
        if np.any(np.abs(pi.sum(axis=1) - 1.0) > 1e-12):
            raise ChannelError("channel rows must sum to 1")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "pi_pinv", _frozen(pseudo_inverse(pi)))

    @property
    def x_size(self) -> int:
        return self.pi.shape[0]

    @property
    def z_size(self) -> int:
        return self.pi.shape[1]

    @property
    def spec(self) -> str:
        if self.family == "bsc":
            return f"bsc:{self.delta!r}"
        if self.family == "qsc":
            return f"qsc:{self.z_size}:{self.delta!r}"
        return "general"


def build_qsc(alphabet_size: int, delta: float) -> ChannelModel:
    """Symmetric channel: keep the symbol w.p. ``1 - delta``, else uniform over the rest."""
    if alphabet_size < 2:
        raise ChannelError("alphabet_size must be >= 2")
    limit = (alphabet_size - 1) / alphabet_size
    if not 0.0 <= delta < limit:
        raise ChannelError(f"delta={delta} outside [0, {limit:g})")
    pi = np.full((alphabet_size, alphabet_size), delta / (alphabet_size - 1))
    np.fill_diagonal(pi, 1.0 - delta)
    family = "bsc" if alphabet_size == 2 else "qsc"
    return ChannelModel(pi, family=family, delta=float(delta))


def build_bsc(delta: float) -> ChannelModel:
    if not 0.0 <= delta < 0.5:
        raise ChannelError(f"BSC crossover {delta} outside [0, 0.5)")
    return build_qsc(2, delta)


def scale_qsc(base: ChannelModel, factor: float) -> ChannelModel:
    """Symmetric channel of the same size with ``delta`` multiplied by ``factor``."""
    if base.family not in ("bsc", "qsc"):
        raise ChannelError("only symmetric channels can be scaled")
    if factor <= 0:
        raise ChannelError("factor must be positive")
    return build_qsc(base.z_size, base.delta * factor)


@dataclass(frozen=True)
class LossModel:
    lam: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.lam)
        if lam.ndim != 2 or np.any(lam < 0):
            raise ValueError("loss matrix must be 2-D and non-negative")
        object.__setattr__(self, "lam", lam)

    @property
    def lambda_max(self) -> float:
        return float(self.lam.max())


def hamming(size: int) -> LossModel:
    return LossModel(1.0 - np.eye(size))


@dataclass(frozen=True)
class SingletDenoiserSet:
    z_size: int
    xhat_size: int

    @property
    def count(self) -> int:
        return self.xhat_size**self.z_size

    def decode(self, index: int) -> tuple[int, ...]:
        """Mapping ``(s(0), ..., s(|Z|-1))`` for singlet ``index``."""
        if not 0 <= index < self.count:
            raise IndexError(index)
        out = []
        for _ in range(self.z_size):
            index, digit = divmod(index, self.xhat_size)
            out.append(digit)
        return tuple(out)

    def encode(self, mapping) -> int:
        mapping = tuple(mapping)
        if len(mapping) != self.z_size or any(not 0 <= v < self.xhat_size for v in mapping):
            raise ValueError(f"invalid singlet mapping {mapping}")
        return sum(v * self.xhat_size**z for z, v in enumerate(mapping))

    def table(self) -> np.ndarray:
        """``table[j, z] = s_j(z)`` for every singlet, shape (|S|, |Z|)."""
        j = np.arange(self.count)[:, None]
        return (j // self.xhat_size ** np.arange(self.z_size)[None, :]) % self.xhat_size

    def identity_index(self) -> int:
        return self.encode(range(self.z_size))


def _check_dims(ch: ChannelModel, loss: LossModel, s_set: SingletDenoiserSet):
    if loss.lam.shape[0] != ch.x_size or loss.lam.shape[1] != s_set.xhat_size:
        raise ValueError("loss matrix shape does not match channel/singlet alphabets")
    if s_set.z_size != ch.z_size:
        raise ValueError("singlet set noisy alphabet does not match channel")


def rho_matrix(ch: ChannelModel, loss: LossModel, s_set: SingletDenoiserSet) -> np.ndarray:
    """Expected loss ``rho[x, s] = sum_z pi[x, z] * lam[x, s(z)]``."""
    _check_dims(ch, loss, s_set)
    tab = s_set.table()  # (S, Z)
    # lam[x, tab[s, z]] -> (X, S, Z)
    per = loss.lam[:, tab]
    return np.einsum("xz,xsz->xs", ch.pi, per)


def partial_rho(ch: ChannelModel, loss: LossModel) -> np.ndarray:
    """``rho_z[x, xhat] = pi[x, z] * lam[x, xhat]`` stacked over z, shape (Z, X, X_hat)."""
    return ch.pi.T[:, :, None] * loss.lam[None, :, :]


@dataclass(frozen=True)
class PseudoLabelSet:
    l: np.ndarray
    l_new: np.ndarray
    l_max: float
    partial_l: np.ndarray  # (Z, Z, X_hat): partial_l[z] = L_z
    partial_l_new: np.ndarray
    partial_l_max: float

    def reduced_targets(self) -> np.ndarray:
        """Row ``z_obs`` holds the concatenation over z of ``partial_l_new[z][z_obs]``."""
        z_size = self.partial_l_new.shape[0]
        return np.transpose(self.partial_l_new, (1, 0, 2)).reshape(z_size, -1)


def pseudo_labels(ch: ChannelModel, loss: LossModel, s_set: SingletDenoiserSet) -> PseudoLabelSet:
    rho = rho_matrix(ch, loss, s_set)
    l = ch.pi_pinv @ rho
    l_max = float(l.max())
    l_new = l_max - l
    part = np.einsum("zx,wxy->wzy", ch.pi_pinv, partial_rho(ch, loss))
    part_max = float(part.max())
    return PseudoLabelSet(
        l=_frozen(l),
        l_new=_frozen(l_new),
        l_max=l_max,
        partial_l=_frozen(part),
        partial_l_new=_frozen(part_max - part),
        partial_l_max=part_max,
    )


@dataclass(frozen=True)
class TrueLabelSet:
    rho_true: np.ndarray  # row (x, z) at x * |Z| + z
    l_true: np.ndarray


def true_labels(loss: LossModel, s_set: SingletDenoiserSet, z_size: int) -> TrueLabelSet:
    if z_size != s_set.z_size or loss.lam.shape[1] != s_set.xhat_size:
        raise ValueError("dimension mismatch between loss, singlet set and z_size")
    tab = s_set.table()  # (S, Z)
    x_size = loss.lam.shape[0]
    rho = np.empty((x_size * z_size, s_set.count))
    for x in range(x_size):
        for z in range(z_size):
            rho[x * z_size + z] = loss.lam[x, tab[:, z]]
    return TrueLabelSet(rho_true=_frozen(rho), l_true=_frozen(loss.lambda_max - rho))


# -- text formats ---------------------------------------------------------


def read_matrix(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = tokens[2:]
    if len(vals) != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, found {len(vals)}")
    return np.array([float(v) for v in vals]).reshape(rows, cols)


def write_matrix(m, path) -> None:
    m = np.asarray(m, dtype=np.float64)
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_channel(spec: str) -> ChannelModel:
    """``bsc:<delta>``, ``qsc:<size>:<delta>`` or a matrix file path."""
    parts = spec.split(":")
    try:
        if parts[0] == "bsc" and len(parts) == 2:
            return build_bsc(float(parts[1]))
        if parts[0] == "qsc" and len(parts) == 3:
            return build_qsc(int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ChannelError(f"bad channel spec {spec!r}: {exc}") from exc
    if parts[0] in ("bsc", "qsc"):
        raise ChannelError(f"bad channel spec {spec!r}")
    if not Path(spec).is_file():
        raise ChannelError(f"channel spec {spec!r} is neither a built-in nor a file")
    return ChannelModel(read_matrix(spec))


def parse_loss(spec: str) -> LossModel:
    """``hamming:<size>`` or a matrix file path."""
    parts = spec.split(":")
    if parts[0] == "hamming" and len(parts) == 2:
        return hamming(int(parts[1]))
    if not Path(spec).is_file():
        raise ValueError(f"loss spec {spec!r} is neither a built-in nor a file")
    return LossModel(read_matrix(spec))
