"""Denoising synthetic NGS reads with the reduced-output network.

For each synthetic organism: DUDE, NDUDE(Sup), NDUDE(Sup+FT), NDUDE(Blind)
and NDUDE(Blind+FT) across window sizes. Supervised models train on reads
resampled every epoch from the organism's reference mutated at 1%.
"""

import argparse
import logging
from pathlib import Path

from ndude.evaluation import write_best_k, write_gnuplot, write_report
from ndude.experiment import SweepConfig, parse_arch, run_sweep


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--orgs", type=int, default=4, help="number of synthetic organisms (distinct seeds)")
    p.add_argument("--ref-len", type=int, default=100_000)
    p.add_argument("--stay", type=float, default=0.9)
    p.add_argument("--reads", type=int, default=6000)
    p.add_argument("--read-len", type=int, default=200)
    p.add_argument("--deltas", default="0.1")
    p.add_argument("--ks", default="3,5,7,10")
    p.add_argument("--mutate", type=float, default=0.01)
    p.add_argument("--arch", default="100*3")
    p.add_argument("--sup-epochs", type=int, default=5)
    p.add_argument("--ft-epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results/dna")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = SweepConfig(
        schemes=["dude", "ndude-sup", "ndude-sup-ft", "ndude-blind", "ndude-blind-ft"],
        context="1d",
        head="reduced",
        ks=[int(v) for v in args.ks.split(",")],
        deltas=[float(v) for v in args.deltas.split(",")],
        datasets=[f"dna:{args.ref_len}:{args.stay}:{args.reads}:{args.read_len}:{org}" for org in range(args.orgs)],
        arch=parse_arch(args.arch),
        sup_epochs=args.sup_epochs,
        ft_epochs=args.ft_epochs,
        ft_lr=1e-4,
        batch_size=args.batch_size,
        train=f"mutated-reference:{args.mutate}",
        blind_range=(0.05, 0.25),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_sweep(cfg, jobs=args.jobs)
    write_report(records, out / "dna.csv", with_error=True)
    write_best_k(records, out / "dna.best_k.csv")
    write_gnuplot(records, out / "plot")
    for r in records:
        print(f"{r.dataset:32s} {r.scheme:15s} k={r.k:<3d} ber={r.ber if r.ber is None else round(r.ber, 5)} {r.error}")


if __name__ == "__main__":
    main()
