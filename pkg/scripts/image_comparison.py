"""Seven-scheme comparison on synthetic binary pattern images.

Supervised models are trained on a pattern corpus drawn with a different seed
from the test images. With ``--train-delta`` the supervised models train at
that fixed level and are tested at every ``--deltas`` level, which gives the
noise-mismatch experiment.
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from ndude.evaluation import write_best_k, write_report
from ndude.experiment import SCHEMES, SweepConfig, parse_arch, run_sweep

KINDS = ["glyphs", "blobs", "stripes", "rings", "checker", "halfplane"]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--size", type=int, default=128, help="test image side")
    p.add_argument("--deltas", default="0.1,0.2")
    p.add_argument("--ells", default="5", help="comma list of odd patch sides")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--schemes", default=",".join(SCHEMES))
    p.add_argument("--arch", default="64*4")
    p.add_argument("--corpus", default="patterns:96:" + "+".join(KINDS * 2) + ":7",
                   help="training corpus spec (e.g. pbm-dir:<dir>)")
    p.add_argument("--train-delta", type=float, default=None, help="fix the supervised training noise level")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--sup-epochs", type=int, default=10)
    p.add_argument("--ft-epochs", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results/images")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = SweepConfig(
        schemes=args.schemes.split(","),
        context="2d",
        ks=[int(v) for v in args.ells.split(",")],
        deltas=[float(v) for v in args.deltas.split(",")],
        datasets=[f"pattern:{k}:{args.size}:{100 + i}" for i, k in enumerate(KINDS)],
        seeds=[int(v) for v in args.seeds.split(",")],
        arch=parse_arch(args.arch),
        epochs=args.epochs,
        sup_epochs=args.sup_epochs,
        ft_epochs=args.ft_epochs,
        train=args.corpus,
        train_delta=args.train_delta,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_sweep(cfg, jobs=args.jobs)
    write_report(records, out / "images.csv", with_error=True)
    write_best_k(records, out / "images.best_k.csv")
    table: dict = {}
    for r in records:
        if not r.error:
            table.setdefault((r.delta, r.scheme), []).append(r.ber)
    for (delta, scheme), bers in sorted(table.items()):
        print(f"delta={delta:<5g} {scheme:15s} mean BER {np.mean(bers):.4f}  (ber/delta {np.mean(bers) / delta:.3f})")


if __name__ == "__main__":
    main()
