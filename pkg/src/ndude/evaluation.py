"""Error-rate metrics and CSV reports."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .channel import LossModel

REPORT_FIELDS = ["scheme", "dataset", "delta", "k", "ber", "ber_over_delta", "n", "seed", "wall_seconds"]


def average_loss(clean, denoised, loss: LossModel | None = None) -> float:
    """Mean per-symbol loss; Hamming (the default) gives the bit/base error rate."""
    clean = np.asarray(clean).reshape(-1)
    denoised = np.asarray(denoised).reshape(-1)
    if clean.shape != denoised.shape:
        raise ValueError(f"length mismatch: {clean.size} vs {denoised.size}")
    if clean.size == 0:
        return 0.0
    if loss is None:
        return float(Fraction(int(np.count_nonzero(clean != denoised)), clean.size))
    return float(loss.lam[clean, denoised].sum() / clean.size)


@dataclass
class EvalRecord:
    scheme: str
    dataset: str
    delta: float | None
    k: int
    ber: float
    n: int
    seed: int
    wall_seconds: float | None = None
    error: str = ""

    @property
    def ber_over_delta(self) -> float | None:
        if self.delta is None or self.delta <= 0 or self.ber is None:
            return None
        return self.ber / self.delta

    def sort_key(self):
        return (self.scheme, self.dataset, -1.0 if self.delta is None else self.delta, self.k, self.seed)


def _g6(v) -> str:
    return "" if v is None else f"{v:.6g}"


def format_report(records, with_error: bool = False, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS + (["error"] if with_error else []))
    for r in sorted(records, key=EvalRecord.sort_key):
        row = [r.scheme, r.dataset, _g6(r.delta), r.k, _g6(r.ber), _g6(r.ber_over_delta), r.n, r.seed,
               _g6(r.wall_seconds) if timing else ""]
        if with_error:
            row.append(r.error)
        w.writerow(row)
    return buf.getvalue()


def write_report(records, path, with_error: bool = False, timing: bool = True) -> Path:
    path = Path(path)
    path.write_text(format_report(records, with_error, timing))
    return path


def append_record(record: EvalRecord, path) -> None:
    """Append one row, writing the header when the file is new or empty."""
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        write_report([record], path)
        return
    lines = format_report([record]).splitlines()
    with open(path, "a") as fh:
        fh.write(lines[1] + "\n")


def read_report(path) -> list[EvalRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def f(key):
                return float(row[key]) if row.get(key) else None
            out.append(EvalRecord(row["scheme"], row["dataset"], f("delta"), int(row["k"]), f("ber"),
                                  int(row["n"]), int(row["seed"]), f("wall_seconds"), row.get("error") or ""))
    return out


def best_k(records) -> list[EvalRecord]:
    """Per (scheme, dataset, delta): the k with the lowest seed-averaged BER."""
    groups: dict = {}
    for r in records:
        if r.error or r.ber is None:
            continue
        groups.setdefault((r.scheme, r.dataset, r.delta), {}).setdefault(r.k, []).append(r)
    out = []
    for (scheme, dataset, delta), by_k in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or 0)):
        k, rs = min(by_k.items(), key=lambda kv: (np.mean([r.ber for r in kv[1]]), kv[0]))
        mean = float(np.mean([r.ber for r in rs]))
        out.append(EvalRecord(scheme, dataset, delta, k, mean, rs[0].n, -1))
    return out


def write_best_k(records, path) -> Path:
    """Summary next to the main report: one row per scheme/dataset/delta (seed column = -1)."""
    return write_report(best_k(records), path, timing=False)


def write_gnuplot(records, directory) -> list[Path]:
    """Two-column ``k ber`` files, one per (scheme, dataset, delta, seed) cell."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cells: dict = {}
    for r in sorted(records, key=EvalRecord.sort_key):
        if not r.error:
            cells.setdefault((r.scheme, r.dataset, r.delta, r.seed), []).append((r.k, r.ber))
    paths = []
    for (scheme, dataset, delta, seed), pts in cells.items():
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in f"{scheme}_{dataset}_{delta}_{seed}")
        p = directory / f"{safe}.dat"
        p.write_text("".join(f"{k} {ber:.6g}\n" for k, ber in pts))
        paths.append(p)
    return paths

