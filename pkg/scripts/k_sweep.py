"""DUDE vs NDUDE(Rand) error rate as a function of the window size k.

Binary symmetric Markov source through a BSC. Writes the full CSV, a
best-k summary and gnuplot-ready ``k ber`` files.
"""

import argparse
import logging
from pathlib import Path

from ndude.evaluation import write_best_k, write_gnuplot, write_report
from ndude.experiment import SweepConfig, run_sweep


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=200_000, help="sequence length")
    p.add_argument("--stay", type=float, default=0.9, help="Markov stay probability")
    p.add_argument("--deltas", default="0.1", help="comma list of noise levels")
    p.add_argument("--ks", default="1,2,3,4,5,6,7,8")
    p.add_argument("--seeds", default="0")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results/k_sweep")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = SweepConfig(
        schemes=["dude", "ndude-rand"],
        ks=[int(k) for k in args.ks.split(",")],
        deltas=[float(d) for d in args.deltas.split(",")],
        datasets=[f"markov:{args.n}:{args.stay}"],
        seeds=[int(s) for s in args.seeds.split(",")],
        arch=[40, 40, 40],
        epochs=args.epochs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_sweep(cfg, jobs=args.jobs)
    write_report(records, out / "k_sweep.csv")
    write_best_k(records, out / "k_sweep.best_k.csv")
    write_gnuplot(records, out / "plot")
    for r in records:
        print(f"{r.scheme:12s} delta={r.delta:<5g} k={r.k} seed={r.seed} ber={r.ber:.5f} ber/delta={r.ber_over_delta:.3f}")


if __name__ == "__main__":
    main()
