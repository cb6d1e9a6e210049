"""Command-line entry point: ``ndude <subcommand> ...``.

Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
The default seed is taken from ``DENOISE_SEED`` when ``--seed`` is absent.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .channel import ChannelError, hamming, parse_channel, parse_loss
from .context import ContextSpec
from .data import (
    BinaryImage,
    FormatError,
    PATTERNS,
    corrupt,
    generate_reads,
    load_fasta,
    load_pbm,
    make_rng,
    make_synthetic_reference,
    mutate_reference,
    pattern_image,
    save_fasta,
    save_pbm,
    write_manifest_sidecar,
)
from .denoiser import ModelMismatchError, denoise_with_model, dude_denoise
from .evaluation import EvalRecord, append_record, average_loss, write_best_k, write_gnuplot, write_report
from .experiment import ConfigError, parse_arch, parse_sweep_config, run_sweep
from .nn import CheckpointError, Head, build_model, load_model, save_model
from .training import (
    SupervisedPairs,
    TrainingConfig,
    finetune,
    stack_windows,
    supervised_from_clean,
    train_pseudo,
    train_supervised,
    train_supervised_blind,
    train_vanilla_sl,
    write_log,
)

log = logging.getLogger("ndude")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- file handling ------------------------------------------------------------


class Payload:
    """Symbols read from a PBM or FASTA file, with enough to write them back."""

    def __init__(self, kind: str, arrays: list, names: list | None = None):
        self.kind = kind
        self.arrays = arrays
        self.names = names or []

    @property
    def alphabet(self) -> int:
        return 2 if self.kind == "pbm" else 4


def _detect(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".pbm":
        return "pbm"
    if suffix in (".fa", ".fasta", ".fna"):
        return "fasta"
    head = path.read_bytes()[:2]
    if head in (b"P1", b"P4"):
        return "pbm"
    if head[:1] == b">":
        return "fasta"
    raise UsageError(f"{path}: cannot tell whether this is PBM or FASTA")


def read_payload(path) -> Payload:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{path}: no such file")
    kind = _detect(path)
    if kind == "pbm":
        return Payload("pbm", [load_pbm(path).bits])
    recs = load_fasta(path)
    if not recs:
        raise UsageError(f"{path}: no FASTA records")
    names = [n for n, _ in recs]
    seqs = [s for _, s in recs]
    if len({len(s) for s in seqs}) == 1:
        return Payload("fasta", [np.stack(seqs)], names)  # reads
    return Payload("fasta", seqs, names)


def write_payload(payload: Payload, arrays: list, path) -> None:
    if payload.kind == "pbm":
        save_pbm(BinaryImage(np.asarray(arrays[0], dtype=np.uint8)), path)
        return
    seqs = [row for a in arrays for row in (a if a.ndim == 2 else [a])]
    save_fasta(list(zip(payload.names, seqs)), path)


def _channel(spec: str):
    try:
        return parse_channel(spec)
    except ChannelError as exc:
        raise UsageError(f"--channel: {exc}") from None


def _check_alphabet(ch, payload: Payload, what: str):
    if ch.z_size != payload.alphabet:
        raise UsageError(f"{what}: channel alphabet {ch.z_size} does not match data alphabet {payload.alphabet}")


def _default_seed() -> int:
    env = os.environ.get("DENOISE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"DENOISE_SEED must be an integer, got {env!r}") from None


def _seed(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _loss(args, alphabet: int):
    return parse_loss(args.loss) if getattr(args, "loss", None) else hamming(alphabet)


# -- subcommands ----------------------------------------------------------------


def cmd_corrupt(args) -> int:
    ch = _channel(args.channel)
    payload = read_payload(args.inp)
    _check_alphabet(ch, payload, "corrupt")
    seed = _seed(args)
    rng = make_rng(seed)
    noisy = [corrupt(a, ch, rng) for a in payload.arrays]
    write_payload(payload, noisy, args.out)
    write_manifest_sidecar(args.out, args.channel, seed)
    return 0


def _org_seed(seed: int, org: int, stream: int) -> int:
    return int(make_rng([seed, org, stream]).integers(2**63))


def cmd_make_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _seed(args)
    lines = [f"kind={args.kind}", f"seed={seed}"]
    if args.kind == "patterns":
        for i, kind in enumerate(args.patterns.split(",")):
            if kind not in PATTERNS:
                raise UsageError(f"unknown pattern {kind!r}; choose from {', '.join(PATTERNS)}")
            path = out / f"{i:02d}_{kind}.pbm"
            save_pbm(BinaryImage(pattern_image(kind, args.size, _org_seed(seed, i, 0))), path)
            lines.append(f"image {path.name}")
        (out / "manifest.txt").write_text("\n".join(lines) + "\n")
        return 0
    ch = _channel(args.channel)
    if ch.z_size != 4:
        raise UsageError("--channel must act on the 4-letter DNA alphabet")
    if not 0.0 <= args.mutate < 1.0:
        raise UsageError("--mutate must lie in [0, 1)")
    if args.orgs < 1 or args.reads < 0 or args.read_len < 1 or args.ref_len < args.read_len:
        raise UsageError("need --orgs >= 1, --reads >= 0 and 1 <= --read-len <= --ref-len")
    lines += [f"channel={args.channel}", f"ref_len={args.ref_len}", f"stay={args.stay}",
              f"mutate={args.mutate}", f"reads={args.reads}", f"read_len={args.read_len}"]
    for org in range(1, args.orgs + 1):
        label = f"ORG-{org}"
        d = out / label
        d.mkdir(exist_ok=True)
        ref = make_synthetic_reference(args.ref_len, _org_seed(seed, org, 1), "markov", args.stay, label)
        mutated = mutate_reference(ref, args.mutate, _org_seed(seed, org, 2))
        reads = generate_reads(ref, args.read_len, args.reads, _org_seed(seed, org, 3))
        noise_seed = _org_seed(seed, org, 4)
        noisy = corrupt(reads.reads, ch, noise_seed)
        save_fasta([(label, ref.symbols)], d / "reference.fa", width=80)
        save_fasta([(f"{label}-mutated", mutated.symbols)], d / "reference_mutated.fa", width=80)
        ids = [f"{label}_{rid}_pos{off}" for rid, off in zip(reads.ids, reads.offsets)]
        save_fasta(list(zip(ids, reads.reads)), d / "reads_clean.fa")
        save_fasta(list(zip(ids, noisy)), d / "reads_noisy.fa")
        write_manifest_sidecar(d / "reads_noisy.fa", args.channel, noise_seed)
        for name in ("reference.fa", "reference_mutated.fa", "reads_clean.fa", "reads_noisy.fa",
                     "reads_noisy.fa.corruption.txt"):
            lines.append(f"{label} {label}/{name}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    return 0


def _context(text: str) -> ContextSpec:
    try:
        return ContextSpec.parse(text)
    except ValueError as exc:
        raise UsageError(f"--context: {exc}") from None


def _blind_range(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--blind-range expects lo:hi, got {text!r}") from None
    if not 0.0 <= lo < hi:
        raise UsageError("--blind-range needs 0 <= lo < hi")
    return lo, hi


def _payloads(paths) -> tuple[list, int]:
    loaded = [read_payload(p) for p in paths]
    kinds = {p.kind for p in loaded}
    if len(kinds) > 1:
        raise UsageError("mixing PBM and FASTA inputs")
    return [a for p in loaded for a in p.arrays], loaded[0].alphabet


def cmd_train(args) -> int:
    context = _context(args.context)
    seed = _seed(args)
    if args.mode == "sup-blind" and args.blind_range is None:
        raise UsageError("--mode sup-blind requires --blind-range lo:hi")
    if args.mode != "sup-blind" and args.blind_range is not None:
        raise UsageError("--blind-range only applies to --mode sup-blind")
    if args.noisy and args.mode not in ("sup", "sl"):
        raise UsageError("--noisy pairs only apply to --mode sup or sl")
    if args.mode == "sl" and args.head != "full":
        raise UsageError("--mode sl uses its own direct head; omit --head")
    data, alphabet = _payloads(args.data)
    loss = _loss(args, alphabet)
    head = Head("direct" if args.mode == "sl" else args.head, alphabet, alphabet)
    init = build_model(parse_arch(args.arch), seed, head, context)
    cfg = TrainingConfig(mode=args.mode, epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
                         seed=seed, regen_pairs=args.regen_pairs, blind_redraw=args.blind_redraw,
                         blind_delta_range=_blind_range(args.blind_range) if args.blind_range else None)
    if args.mode == "sup-blind":
        if args.channel:
            log.info("--channel is ignored for blind training (symmetric channels over the range)")
        model, hist = train_supervised_blind(data, alphabet, cfg.blind_delta_range, loss, cfg, init)
    else:
        if args.channel is None and not args.noisy:
            raise UsageError(f"--mode {args.mode} requires --channel" + ("" if args.mode == "pseudo" else
                                                                             " or --noisy pairs"))
        ch = _channel(args.channel) if args.channel else None
        if ch is not None and ch.z_size != alphabet:
            raise UsageError(f"channel alphabet {ch.z_size} does not match data alphabet {alphabet}")
        if args.mode == "pseudo":
            model, hist = train_pseudo(data, ch, loss, cfg, init)
        else:
            center = args.mode == "sl"
            if args.noisy:
                noisy, _ = _payloads(args.noisy)
                if [a.shape for a in noisy] != [a.shape for a in data]:
                    raise UsageError("--noisy files must match --data files in shape")
                win, z = stack_windows(noisy, context, center)
                x = np.concatenate([a.reshape(-1) for a in data]).astype(np.int64)
                pairs = SupervisedPairs(win, x, z)
            else:
                pairs = supervised_from_clean(data, ch, context, cfg, center)
            if args.mode == "sl":
                model, hist = train_vanilla_sl(pairs, cfg, init)
            else:
                model, hist = train_supervised(pairs, loss, cfg, init)
    save_model(model, args.out)
    write_log(hist, str(args.out) + ".log.csv")
    return 0


def cmd_finetune(args) -> int:
    model = load_model(args.model)
    if model.provenance in ("rand", "ft"):
        log.warning("fine-tuning a model with provenance %r (expected sup or sup-blind)", model.provenance)
    if model.head.kind == "direct":
        raise UsageError("a direct-mapping (sl) model cannot be fine-tuned")
    ch = _channel(args.channel)
    noisy, alphabet = _payloads(args.noisy)
    if ch.z_size != alphabet or model.head.z_size != alphabet:
        raise UsageError(f"model alphabet {model.head.z_size}, channel {ch.z_size} and data {alphabet} disagree")
    lr = args.lr if args.lr is not None else (1e-4 if alphabet == 4 else 1e-3)
    cfg = TrainingConfig(mode="ft", epochs=args.epochs, batch_size=args.batch_size, learning_rate=lr,
                         seed=_seed(args))
    tuned, hist = finetune(model, noisy, ch, _loss(args, alphabet), cfg)
    save_model(tuned, args.out)
    write_log(hist, str(args.out) + ".log.csv")
    return 0


def _dude_context(text: str) -> ContextSpec:
    kind, _, value = text.partition(":")
    try:
        size = int(value)
    except ValueError:
        raise UsageError(f"--dude expects k:<k> or ell:<ell>, got {text!r}") from None
    if kind == "k":
        return ContextSpec("1d", size)
    if kind == "ell":
        return ContextSpec("2d", size)
    raise UsageError(f"--dude expects k:<k> or ell:<ell>, got {text!r}")


def cmd_denoise(args) -> int:
    payload = read_payload(args.inp)
    if args.dude:
        if not args.channel:
            raise UsageError("--dude requires --channel")
        ch = _channel(args.channel)
        _check_alphabet(ch, payload, "denoise")
        context = _dude_context(args.dude)
        loss = _loss(args, payload.alphabet)
        outs = [dude_denoise(a, ch, loss, context).symbols for a in payload.arrays]
    else:
        model = load_model(args.model)
        if model.head.z_size != payload.alphabet:
            raise UsageError(f"model alphabet {model.head.z_size} does not match data alphabet {payload.alphabet}")
        if args.channel:
            _check_alphabet(_channel(args.channel), payload, "denoise")
        outs = [denoise_with_model(model, a).symbols for a in payload.arrays]
    write_payload(payload, outs, args.out)
    return 0


def cmd_eval(args) -> int:
    clean = read_payload(args.clean)
    den = read_payload(args.denoised)
    if clean.kind != den.kind or [a.shape for a in clean.arrays] != [a.shape for a in den.arrays]:
        raise UsageError("clean and denoised files differ in format or shape")
    x = np.concatenate([a.reshape(-1) for a in clean.arrays])
    y = np.concatenate([a.reshape(-1) for a in den.arrays])
    ber = average_loss(x, y)
    rec = EvalRecord(args.scheme, args.dataset or Path(args.clean).name, args.delta, args.k, ber, x.size,
                     _seed(args))
    append_record(rec, args.report)
    print(f"ber={ber:.6g}" + (f" ber/delta={rec.ber_over_delta:.6g}" if rec.ber_over_delta is not None else ""))
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = parse_sweep_config(Path(args.config).read_text())
    except ConfigError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    records = run_sweep(cfg, jobs=args.jobs)
    failed = [r for r in records if r.error]
    write_report(records, args.out, with_error=True, timing=args.timing)
    out = Path(args.out)
    write_best_k(records, out.with_name(out.stem + ".best_k.csv"))
    if args.gnuplot:
        write_gnuplot(records, args.gnuplot)
    for r in failed:
        log.error("cell %s %s k=%s delta=%s seed=%s failed: %s", r.scheme, r.dataset, r.k, r.delta, r.seed, r.error)
    if records and len(failed) == len(records):
        return 2
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ndude", description="Sliding-window discrete denoisers: DUDE and neural DUDE.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seed_arg(sp):
        sp.add_argument("--seed", type=int, default=None,
                        help="seed for every random draw (default: $DENOISE_SEED, else 0)")

    c = sub.add_parser("corrupt", help="pass a PBM or FASTA file through a noisy channel")
    c.add_argument("--channel", required=True, help="bsc:<delta>, qsc:<n>:<delta> or a matrix file")
    seed_arg(c)
    c.add_argument("--in", dest="inp", required=True, help="clean PBM or FASTA file")
    c.add_argument("--out", required=True, help="corrupted output (same format); a .corruption.txt sidecar "
                                                 "records channel and seed")
    c.set_defaults(func=cmd_corrupt)

    m = sub.add_parser("make-data", help="generate synthetic DNA organisms or pattern images")
    m.add_argument("--kind", choices=["dna", "patterns"], default="dna", help="dataset family")
    m.add_argument("--orgs", type=int, default=4, help="number of synthetic organisms")
    m.add_argument("--ref-len", type=int, default=100_000, help="reference length per organism")
    m.add_argument("--stay", type=float, default=0.9, help="probability a reference base repeats its predecessor")
    m.add_argument("--mutate", type=float, default=0.01, help="substitution rate of the supervised reference")
    m.add_argument("--reads", type=int, default=6000, help="reads per organism")
    m.add_argument("--read-len", type=int, default=200, help="read length")
    m.add_argument("--channel", default="qsc:4:0.1", help="channel for the noisy reads")
    m.add_argument("--patterns", default=",".join(PATTERNS), help="comma list of pattern kinds (kind=patterns)")
    m.add_argument("--size", type=int, default=64, help="pattern image side length (kind=patterns)")
    seed_arg(m)
    m.add_argument("--out", required=True, help="output directory (a manifest.txt lists every file)")
    m.set_defaults(func=cmd_make_data)

    t = sub.add_parser("train", help="train a sliding-window network")
    t.add_argument("--mode", choices=["pseudo", "sup", "sup-blind", "sl"], required=True,
                   help="pseudo: adaptive on noisy data; sup: supervised at one channel; "
                        "sup-blind: supervised over a noise range; sl: direct classifier baseline")
    t.add_argument("--head", choices=["full", "reduced"], default="full",
                   help="full: one output per singlet mapping; reduced: |Z| groups of |X| outputs")
    t.add_argument("--context", required=True, help="1d:<k> (k symbols each side) or 2d:<ell> (odd patch side)")
    t.add_argument("--arch", default="40*3", help="hidden widths, e.g. 128*12 or 100,100,100")
    t.add_argument("--channel", help="channel spec; for pseudo the channel of the data, for sup/sl the one "
                                     "used to corrupt the clean data")
    t.add_argument("--blind-range", help="lo:hi noise range for sup-blind, e.g. 0.05:0.25")
    t.add_argument("--blind-redraw", choices=["epoch", "batch"], default="epoch",
                   help="how often sup-blind redraws the noise level")
    t.add_argument("--regen-pairs", action="store_true", help="re-corrupt the clean corpus every epoch")
    t.add_argument("--data", nargs="+", required=True,
                   help="noisy files (pseudo) or clean files (sup, sup-blind, sl)")
    t.add_argument("--noisy", nargs="+", help="noisy counterparts of --data for fixed supervised pairs")
    t.add_argument("--loss", help="hamming:<n> or a loss matrix file (default Hamming)")
    seed_arg(t)
    t.add_argument("--epochs", type=int, default=None, help="passes over the data (default 10, 20 for sup)")
    t.add_argument("--batch-size", type=int, default=256, help="mini-batch size")
    t.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    t.add_argument("--out", required=True, help="checkpoint path; the epoch log goes to <out>.log.csv")
    t.set_defaults(func=cmd_train)

    f = sub.add_parser("finetune", help="adapt a pre-trained model to noisy data with the true channel")
    f.add_argument("--model", required=True, help="pre-trained checkpoint (sup or sup-blind)")
    f.add_argument("--noisy", nargs="+", required=True, help="noisy files to adapt to")
    f.add_argument("--channel", required=True, help="true channel of the noisy data")
    f.add_argument("--loss", help="hamming:<n> or a loss matrix file (default Hamming)")
    f.add_argument("--lr", type=float, default=None, help="Adam learning rate (default 1e-3 images, 1e-4 DNA)")
    f.add_argument("--epochs", type=int, default=10, help="fine-tuning passes (0 copies the model)")
    f.add_argument("--batch-size", type=int, default=256, help="mini-batch size")
    seed_arg(f)
    f.add_argument("--out", required=True, help="fine-tuned checkpoint path")
    f.set_defaults(func=cmd_finetune)

    d = sub.add_parser("denoise", help="denoise a PBM or FASTA file")
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--model", help="trained checkpoint")
    g.add_argument("--dude", help="count-based DUDE with k:<k> (1-D) or ell:<ell> (2-D patch)")
    d.add_argument("--channel", help="channel spec (required with --dude)")
    d.add_argument("--loss", help="hamming:<n> or a loss matrix file (default Hamming; --dude only)")
    d.add_argument("--in", dest="inp", required=True, help="noisy input")
    d.add_argument("--out", required=True, help="denoised output, same format as the input")
    d.set_defaults(func=cmd_denoise)

    e = sub.add_parser("eval", help="error rate of a denoised file against the clean one")
    e.add_argument("--clean", required=True, help="clean reference file")
    e.add_argument("--denoised", required=True, help="file to score")
    e.add_argument("--delta", type=float, help="channel noise level, fills ber_over_delta")
    e.add_argument("--scheme", default="eval", help="scheme label for the report row")
    e.add_argument("--dataset", help="dataset label (default: clean file name)")
    e.add_argument("--k", type=int, default=0, help="window size label for the report row")
    seed_arg(e)
    e.add_argument("--report", required=True, help="CSV to append to (header written when new)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="run a scheme x dataset x delta x k x seed grid from a config file")
    s.add_argument("--config", required=True, help="key = value config file (see README)")
    s.add_argument("--out", required=True, help="results CSV; a <stem>.best_k.csv summary is written beside it")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--timing", action="store_true", help="fill wall_seconds (makes the CSV non-reproducible)")
    s.add_argument("--gnuplot", help="directory for per-cell 'k ber' data files")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "train" and args.epochs is None:
        args.epochs = 20 if args.mode in ("sup", "sup-blind", "sl") else 10
    try:
        return args.func(args)
    except (FormatError, CheckpointError, OSError) as exc:
        print(f"ndude {args.command}: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ChannelError, ConfigError, ModelMismatchError, ValueError) as exc:
        print(f"ndude {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"ndude {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
