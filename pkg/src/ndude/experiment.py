"""Scheme runners, k-sweeps and the line-oriented sweep configuration.

Config grammar: one ``key = value`` per line, ``#`` starts a comment, list
values are comma separated. Keys::

    schemes     dude, ndude-rand, ndude-sup, ndude-sup-ft, ndude-blind, ndude-blind-ft, sl
    context     1d | 2d
    ks          window sizes (k for 1d, odd ell for 2d)
    deltas      test noise levels
    datasets    dataset specs (see parse_dataset)
    seeds       integer seeds
    head        full | reduced            (default full)
    arch        hidden widths, e.g. 128*12 or 100,100,100
    epochs      pseudo-label epochs for ndude-rand          (default 10)
    sup_epochs  supervised / SL epochs                      (default 20)
    ft_epochs   fine-tuning epochs                          (default 10)
    lr, ft_lr, batch_size
    train       training corpus spec for supervised schemes
    train_delta noise level for supervised corpora (default: the test delta)
    blind_range lo:hi                                       (default 0.05:0.25)
    blind_redraw epoch | batch
    regen_pairs true | false
    checkpoint.<scheme>.<k>  path of a pre-trained model for that cell
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelModel, build_qsc, hamming
from .context import ContextSpec
from .data import (
    ReferenceSequence,
    generate_reads,
    load_fasta,
    load_pbm,
    make_rng,
    make_synthetic_reference,
    markov_binary,
    mutate_reference,
    pattern_corpus,
    pattern_image,
    corrupt,
)
from .denoiser import denoise_with_model, dude_denoise
from .evaluation import EvalRecord, average_loss
from .nn import Head, build_model, load_model
from .training import (
    TrainingConfig,
    finetune,
    make_pairs,
    supervised_from_clean,
    train_pseudo,
    train_supervised,
    train_supervised_blind,
    train_vanilla_sl,
)

log = logging.getLogger(__name__)

SCHEMES = ("dude", "ndude-rand", "ndude-sup", "ndude-sup-ft", "ndude-blind", "ndude-blind-ft", "sl")


class ConfigError(ValueError):
    pass


@dataclass
class Dataset:
    name: str
    arrays: list  # clean arrays
    alphabet: int
    reference: ReferenceSequence | None = None
    read_len: int = 0
    reads: int = 0


def parse_dataset(spec: str) -> Dataset:
    """Clean data from a spec string.

    ``markov:<n>:<stay>[:<seed>]``          binary Markov sequence
    ``pattern:<kind>:<size>[:<seed>]``      synthetic binary image
    ``pbm:<path>``                          binary image file
    ``dna:<ref_len>:<stay>:<reads>:<read_len>[:<seed>]``  reads from a Markov reference
    ``fasta:<path>``                        DNA records (equal lengths are stacked as reads)
    """
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "markov":
            seed = int(parts[2]) if len(parts) > 2 else 0
            return Dataset(spec, [markov_binary(int(parts[0]), float(parts[1]), seed)], 2)
        if kind == "pattern":
            seed = int(parts[2]) if len(parts) > 2 else 0
            return Dataset(spec, [pattern_image(parts[0], int(parts[1]), seed)], 2)
        if kind == "pbm":
            return Dataset(spec, [load_pbm(rest).bits], 2)
        if kind == "dna":
            ref_len, stay, count, read_len = int(parts[0]), float(parts[1]), int(parts[2]), int(parts[3])
            seed = int(parts[4]) if len(parts) > 4 else 0
            ref = make_synthetic_reference(ref_len, [seed, 1], "markov", stay)
            reads = generate_reads(ref, read_len, count, [seed, 2]).reads
            return Dataset(spec, [reads], 4, ref, read_len, count)
        if kind == "fasta":
            recs = [s for _, s in load_fasta(rest)]
            if recs and len({len(s) for s in recs}) == 1:
                return Dataset(spec, [np.stack(recs)], 4, read_len=len(recs[0]), reads=len(recs))
            return Dataset(spec, recs, 4)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad dataset spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown dataset kind in {spec!r}")


def parse_corpus(spec: str, dataset: Dataset):
    """Supervised training corpus: a list of clean arrays, or a callable ``rng -> list``.

    ``patterns:<size>:<kind>+<kind>...[:<seed>]``  synthetic images
    ``pbm-dir:<dir>``                             every ``*.pbm`` in a directory
    ``markov:<n>:<stay>[:<seed>]``                binary Markov sequence
    ``mutated-reference:<rate>[:<seed>]``         reads resampled each draw from the
                                                  dataset reference mutated at ``rate``
    ``fasta:<path>``                              DNA records
    """
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "patterns":
            kinds = parts[1].split("+")
            seed = int(parts[2]) if len(parts) > 2 else 0
            return pattern_corpus(kinds, int(parts[0]), seed)
        if kind == "pbm-dir":
            files = sorted(Path(rest).glob("*.pbm"))
            if not files:
                raise ConfigError(f"no .pbm files in {rest}")
            return [load_pbm(f).bits for f in files]
        if kind == "markov":
            seed = int(parts[2]) if len(parts) > 2 else 0
            return [markov_binary(int(parts[0]), float(parts[1]), seed)]
        if kind == "mutated-reference":
            if dataset.reference is None:
                raise ConfigError("mutated-reference needs a dna: dataset")
            seed = int(parts[1]) if len(parts) > 1 else 0
            mutated = mutate_reference(dataset.reference, float(parts[0]), [seed, 3])
            return lambda rng: [generate_reads(mutated, dataset.read_len, dataset.reads, rng).reads]
        if kind == "fasta":
            recs = [s for _, s in load_fasta(rest)]
            if recs and len({len(s) for s in recs}) == 1:
                return [np.stack(recs)]
            return recs
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad training corpus spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown training corpus kind in {spec!r}")


@dataclass
class SweepConfig:
    schemes: list = field(default_factory=list)
    context: str = "1d"
    ks: list = field(default_factory=list)
    deltas: list = field(default_factory=lambda: [0.1])
    datasets: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    head: str = "full"
    arch: list = field(default_factory=lambda: [40, 40, 40])
    epochs: int = 10
    sup_epochs: int = 20
    ft_epochs: int = 10
    lr: float = 1e-3
    ft_lr: float | None = None
    batch_size: int = 256
    train: str | None = None
    train_delta: float | None = None
    blind_range: tuple = (0.05, 0.25)
    blind_redraw: str = "epoch"
    regen_pairs: bool = False
    checkpoints: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
        if self.context not in ("1d", "2d"):
            raise ConfigError("context must be 1d or 2d")
        if self.head not in ("full", "reduced"):
            raise ConfigError("head must be full or reduced")


def parse_arch(text: str) -> list[int]:
    """``128*12`` (12 layers of 128) or a comma list of widths."""
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        width, _, reps = part.partition("*")
        out += [int(width)] * (int(reps) if reps else 1)
    return out


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _list(v: str) -> list[str]:
    return [p.strip() for p in v.split(",") if p.strip()]


def parse_sweep_config(text: str) -> SweepConfig:
    cfg: dict = {}
    checkpoints = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = key.strip(), value.strip()
        try:
            if key.startswith("checkpoint."):
                _, scheme, k = key.split(".")
                checkpoints[(scheme, int(k))] = value
            elif key in ("schemes", "datasets"):
                cfg[key] = _list(value)
            elif key == "ks":
                cfg[key] = [int(v) for v in _list(value)]
            elif key == "seeds":
                cfg[key] = [int(v) for v in _list(value)]
            elif key == "deltas":
                cfg[key] = [float(v) for v in _list(value)]
            elif key in ("context", "head", "train", "blind_redraw"):
                cfg[key] = value
            elif key == "arch":
                cfg[key] = parse_arch(value)
            elif key in ("epochs", "sup_epochs", "ft_epochs", "batch_size"):
                cfg[key] = int(value)
            elif key in ("lr", "ft_lr", "train_delta"):
                cfg[key] = float(value)
            elif key == "blind_range":
                lo, hi = value.split(":")
                cfg[key] = (float(lo), float(hi))
            elif key == "regen_pairs":
                cfg[key] = _bool(value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return SweepConfig(checkpoints=checkpoints, **cfg)


def channel_for(alphabet: int, delta: float) -> ChannelModel:
    return build_qsc(alphabet, delta)


class Runner:
    """Runs one (scheme, dataset, k, delta, seed) cell; caches pre-trained models."""

    def __init__(self, config: SweepConfig):
        self.config = config
        self._models: dict = {}
        self._datasets: dict = {}

    def dataset(self, spec: str) -> Dataset:
        if spec not in self._datasets:
            self._datasets[spec] = parse_dataset(spec)
        return self._datasets[spec]

    def context(self, k: int) -> ContextSpec:
        return ContextSpec(self.config.context, k)

    def head(self, alphabet: int, kind: str | None = None) -> Head:
        return Head(kind or self.config.head, alphabet, alphabet)

    def _train_cfg(self, mode: str, seed: int, epochs: int, lr: float | None = None, **kw) -> TrainingConfig:
        c = self.config
        return TrainingConfig(mode=mode, epochs=epochs, batch_size=c.batch_size,
                              learning_rate=c.lr if lr is None else lr, seed=seed, **kw)

    def base_model(self, scheme: str, ds: Dataset, k: int, delta: float, seed: int):
        """Pre-trained model for sup / blind / sl schemes (loaded or trained on the corpus)."""
        base = {"ndude-sup": "ndude-sup", "ndude-sup-ft": "ndude-sup", "ndude-blind": "ndude-blind",
                "ndude-blind-ft": "ndude-blind", "sl": "sl"}[scheme]
        c = self.config
        for key in ((scheme, k), (base, k)):
            if key in c.checkpoints:
                return load_model(c.checkpoints[key])
        if c.train is None:
            raise ConfigError(f"scheme {scheme} at k={k} needs a checkpoint or a training corpus (train=)")
        train_delta = delta if c.train_delta is None else c.train_delta
        # only a mutated-reference corpus depends on the test dataset
        owner = ds.name if c.train.startswith("mutated-reference") else None
        cache_key = (base, owner, k, None if base == "ndude-blind" else train_delta, seed)
        if cache_key in self._models:
            return self._models[cache_key]
        corpus = parse_corpus(c.train, ds)
        context = self.context(k)
        loss = hamming(ds.alphabet)
        t0 = time.perf_counter()
        if base == "ndude-blind":
            cfg = self._train_cfg("sup-blind", seed, c.sup_epochs, blind_delta_range=c.blind_range,
                                  blind_redraw=c.blind_redraw)
            init = build_model(c.arch, seed, self.head(ds.alphabet), context)
            model, _ = train_supervised_blind(corpus, ds.alphabet, c.blind_range, loss, cfg, init)
        else:
            ch = channel_for(ds.alphabet, train_delta)
            mode = "sl" if base == "sl" else "sup"
            cfg = self._train_cfg(mode, seed, c.sup_epochs, regen_pairs=c.regen_pairs or callable(corpus))
            center = base == "sl"
            if callable(corpus):
                def pairs(epoch, rng):
                    return make_pairs(corpus(rng), ch, context, rng, center)
            else:
                pairs = supervised_from_clean(corpus, ch, context, cfg, center)
            if base == "sl":
                init = build_model(c.arch, seed, self.head(ds.alphabet, "direct"), context)
                model, _ = train_vanilla_sl(pairs, cfg, init)
            else:
                init = build_model(c.arch, seed, self.head(ds.alphabet), context)
                model, _ = train_supervised(pairs, loss, cfg, init)
        log.info("trained %s k=%d in %.1fs", base, k, time.perf_counter() - t0)
        self._models[cache_key] = model
        return model

    def run(self, scheme: str, dataset: str, k: int, delta: float, seed: int) -> EvalRecord:
        t0 = time.perf_counter()
        ds = self.dataset(dataset)
        ch = channel_for(ds.alphabet, delta)
        loss = hamming(ds.alphabet)
        noise_rng = make_rng([seed, 0x5EED, int(round(delta * 1e6))])
        noisy = [corrupt(a, ch, noise_rng) for a in ds.arrays]
        context = self.context(k)
        c = self.config
        if scheme == "dude":
            outs = [dude_denoise(z, ch, loss, context).symbols for z in noisy]
        else:
            if scheme == "ndude-rand":
                init = build_model(c.arch, seed, self.head(ds.alphabet), context)
                model, _ = train_pseudo(noisy, ch, loss, self._train_cfg("pseudo", seed, c.epochs), init)
            else:
                model = self.base_model(scheme, ds, k, delta, seed)
                if scheme.endswith("-ft"):
                    cfg = self._train_cfg("ft", seed, c.ft_epochs, c.ft_lr)
                    model, _ = finetune(model, noisy, ch, loss, cfg)
            outs = [denoise_with_model(model, z).symbols for z in noisy]
        clean = np.concatenate([a.reshape(-1) for a in ds.arrays])
        den = np.concatenate([o.reshape(-1) for o in outs])
        ber = average_loss(clean, den)
        return EvalRecord(scheme, dataset, delta, k, ber, clean.size, seed, time.perf_counter() - t0)


def sweep_k(scheme: str, dataset: str, ks, seeds, delta: float, config: SweepConfig,
            runner: Runner | None = None) -> list[EvalRecord]:
    runner = runner or Runner(config)
    return [runner.run(scheme, dataset, k, delta, seed) for k in ks for seed in seeds]


def _cells(config: SweepConfig):
    return [(s, d, k, delta, seed) for s in config.schemes for d in config.datasets
            for delta in config.deltas for k in config.ks for seed in config.seeds]


def _run_cell(runner: Runner, cell) -> EvalRecord:
    scheme, dataset, k, delta, seed = cell
    try:
        return runner.run(*cell)
    except Exception as exc:  # recorded per cell, never aborts the sweep
        log.warning("cell %s failed: %s", cell, exc)
        return EvalRecord(scheme, dataset, delta, k, None, 0, seed, None, f"{type(exc).__name__}: {exc}")


def _run_chunk(config: SweepConfig, cells):
    runner = Runner(config)
    return [_run_cell(runner, cell) for cell in cells]


def run_sweep(config: SweepConfig, jobs: int = 1) -> list[EvalRecord]:
    """Evaluate every cell of the cross product; results come back sorted."""
    cells = _cells(config)
    if jobs <= 1 or len(cells) <= 1:
        records = _run_chunk(config, cells)
    else:
        # cells sharing a pre-trained model stay in one worker
        groups: dict = {}
        for cell in cells:
            groups.setdefault((cell[1], cell[2], cell[4]), []).append(cell)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_run_chunk, [config] * len(groups), list(groups.values()))
            records = [r for part in parts for r in part]
    return sorted(records, key=EvalRecord.sort_key)

