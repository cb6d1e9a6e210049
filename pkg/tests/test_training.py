import csv
import itertools

import numpy as np
import numpy.testing as npt
import pytest

from ndude.channel import SingletDenoiserSet, build_bsc, build_qsc, hamming
from ndude.context import ContextSpec, encode_batch, windows_1d
from ndude.data import corrupt, make_rng, markov_binary
from ndude.denoiser import build_context_table, dude_denoise, ndude_infer_full, sl_infer
from ndude.evaluation import average_loss
from ndude.nn import Head, build_model, forward
from ndude.training import (
    SupervisedPairs,
    TrainingConfig,
    finetune,
    make_pairs,
    pseudo_target_table,
    supervised_from_clean,
    supervised_target_table,
    train_pseudo,
    train_supervised,
    train_supervised_blind,
    train_vanilla_sl,
    write_log,
)
from ndude.channel import pseudo_labels

BSC = build_bsc(0.1)
HAM = hamming(2)
FULL2 = Head("full", 2, 2)


def same_params(a, b):
    return all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def singlet_choices(model, contexts):
    p, _ = forward(model, encode_batch(contexts, model.head.z_size))
    return np.argmax(p, axis=1)


def all_contexts(k):
    return np.array(list(itertools.product([0, 1], repeat=2 * k)), dtype=np.int16)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(mode="nope")
    with pytest.raises(ValueError):
        TrainingConfig(mode="sup-blind")
    with pytest.raises(ValueError):
        TrainingConfig(mode="sup-blind", blind_delta_range=(0.3, 0.1))
    with pytest.raises(ValueError):
        TrainingConfig(blind_redraw="step")


def test_pseudo_target_row_for_noisy_zero():
    m = build_model([4], 0, FULL2, ContextSpec("1d", 1))
    table = pseudo_target_table(m, BSC, HAM)
    npt.assert_allclose(table[0], [1.25, 0.225, 1.025, 0.0], atol=1e-12)


def test_pseudo_targets_depend_only_on_channel_and_loss():
    m = build_model([4], 0, Head("reduced", 4, 4), ContextSpec("1d", 1))
    ch = build_qsc(4, 0.1)
    table = pseudo_target_table(m, ch, hamming(4))
    npt.assert_array_equal(table, pseudo_labels(ch, hamming(4), SingletDenoiserSet(4, 4)).reduced_targets())


def test_supervised_targets():
    full = build_model([4], 0, FULL2, ContextSpec("1d", 1))
    npt.assert_array_equal(supervised_target_table(full, HAM)[0], [1, 0, 1, 0])
    red = build_model([4], 0, Head("reduced", 4, 4), ContextSpec("1d", 1))
    row = supervised_target_table(red, hamming(4))[1 * 4 + 0]  # clean C, noisy A
    npt.assert_array_equal(row[:4], [0, 1, 0, 0])
    npt.assert_array_equal(row[4:], 1.0)


def test_zero_epochs_return_init_unchanged():
    init = build_model([6], 1, FULL2, ContextSpec("1d", 1))
    z = corrupt(markov_binary(500, 0.9, 0), BSC, 1)
    m, hist = train_pseudo(z, BSC, HAM, TrainingConfig(epochs=0), init)
    assert same_params(m, init) and hist == [] and m.provenance == init.provenance
    init.provenance = "sup"
    m, _ = finetune(init, z, BSC, HAM, TrainingConfig(mode="ft", epochs=0))
    assert same_params(m, init) and m.provenance == "sup"


def test_training_does_not_mutate_init():
    init = build_model([6], 1, FULL2, ContextSpec("1d", 1))
    before = init.copy()
    z = corrupt(markov_binary(500, 0.9, 0), BSC, 1)
    m, _ = train_pseudo(z, BSC, HAM, TrainingConfig(epochs=2), init)
    assert same_params(init, before) and not same_params(m, init)
    assert m.provenance == "rand"


def test_pseudo_matches_dude_at_k1():
    x = markov_binary(100_000, 0.9, 3)
    z = corrupt(x, BSC, 4)
    ctx = ContextSpec("1d", 1)
    init = build_model([40, 40, 40], 0, FULL2, ctx)
    m, hist = train_pseudo(z, BSC, HAM, TrainingConfig(epochs=10), init)
    nd = average_loss(x, ndude_infer_full(m, z).symbols)
    du = average_loss(x, dude_denoise(z, BSC, HAM, ctx).symbols)
    assert nd <= du + 0.003
    obj = [h.objective for h in hist]
    # past the first epoch the objective sits on a plateau with ~1e-4 relative jitter
    steady = [b <= a * (1 + 1e-3) for a, b in zip(obj, obj[1:])]
    assert np.mean(steady) >= 0.8 and obj[-1] < obj[0]


def test_pseudo_singlets_agree_with_dude_on_enumerable_contexts():
    k = 2
    x = markov_binary(200_000, 0.9, 5)
    z = corrupt(x, BSC, 6)
    ctx = ContextSpec("1d", k)
    m, _ = train_pseudo(z, BSC, HAM, TrainingConfig(epochs=6), build_model([40, 40, 40], 1, FULL2, ctx))
    win = windows_1d(z, k)[k:-k]
    table = build_context_table(win, z[k:-k], 2, pseudo_labels(BSC, HAM, SingletDenoiserSet(2, 2)).l)
    sorted_sums = np.sort(table.loss_sums, axis=1)
    # contexts where DUDE's best singlet is clearly separated from the runner-up
    n_ctx = table.counts.sum(axis=1)
    clear = (n_ctx >= 1000) & (sorted_sums[:, 1] - sorted_sums[:, 0] > 0.05 * n_ctx)
    assert clear.sum() >= 8
    dude_choice = np.argmin(table.loss_sums, axis=1)
    nn_choice = singlet_choices(m, table.contexts)
    npt.assert_array_equal(nn_choice[clear], dude_choice[clear])


def test_noiseless_supervised_prefers_identity_singlet():
    ctx = ContextSpec("1d", 1)
    clean = [markov_binary(20_000, 0.8, 1)]
    cfg = TrainingConfig(mode="sup", epochs=4, learning_rate=3e-3)
    pairs = supervised_from_clean(clean, build_bsc(0.0), ctx, cfg)
    m, _ = train_supervised(pairs, HAM, cfg, build_model([16], 0, FULL2, ctx))
    npt.assert_array_equal(singlet_choices(m, all_contexts(1)), SingletDenoiserSet(2, 2).identity_index())


def test_supervised_alphabet_mismatch():
    ctx = ContextSpec("1d", 1)
    bad = SupervisedPairs(np.zeros((3, 2), dtype=np.int16), np.array([0, 3, 1]), np.array([0, 1, 1]))
    with pytest.raises(ValueError):
        train_supervised(bad, HAM, TrainingConfig(mode="sup", epochs=1), build_model([4], 0, FULL2, ctx))


def test_regenerated_pairs_change_per_epoch():
    ctx = ContextSpec("1d", 1)
    cfg = TrainingConfig(mode="sup", regen_pairs=True)
    src = supervised_from_clean([np.zeros(200, dtype=np.uint8)], BSC, ctx, cfg)
    rng = make_rng(0)
    assert not np.array_equal(src(0, rng).noisy, src(1, rng).noisy)


def _blind_and_specific(k, n, epochs):
    ctx = ContextSpec("1d", k)
    clean = [markov_binary(n, 0.9, 8)]
    init = build_model([40, 40], 2, FULL2, ctx)
    blind_cfg = TrainingConfig(mode="sup-blind", epochs=epochs, blind_delta_range=(0.1, 0.1))
    blind, _ = train_supervised_blind(clean, 2, (0.1, 0.1), HAM, blind_cfg, init)
    cfg = TrainingConfig(mode="sup", epochs=epochs, regen_pairs=True)
    spec, _ = train_supervised(supervised_from_clean(clean, BSC, ctx, cfg), HAM, cfg, init)
    return blind, spec


def test_blind_degenerate_range_matches_noise_specific():
    blind, spec = _blind_and_specific(1, 60_000, 5)
    agree = singlet_choices(blind, all_contexts(1)) == singlet_choices(spec, all_contexts(1))
    assert agree.mean() >= 0.95
    x = markov_binary(50_000, 0.9, 9)
    z = corrupt(x, BSC, 10)
    gap = average_loss(x, ndude_infer_full(blind, z).symbols) - average_loss(x, ndude_infer_full(spec, z).symbols)
    assert abs(gap) < 0.002


def test_blind_degenerate_range_k2_agrees_off_bayes_ties():
    blind, spec = _blind_and_specific(2, 60_000, 5)
    ctx = all_contexts(2)
    # posterior P(x=1 | context, z) of the stay-0.9 chain under BSC(0.1) is within 0.1 of 1/2
    # only for the contexts 0001, 1000, 0111 and 1110; training noise may settle those either way
    ties = {(0, 0, 0, 1), (1, 0, 0, 0), (0, 1, 1, 1), (1, 1, 1, 0)}
    keep = np.array([tuple(c) not in ties for c in ctx])
    agree = singlet_choices(blind, ctx)[keep] == singlet_choices(spec, ctx)[keep]
    assert agree.mean() >= 0.95


def test_blind_is_deterministic_and_validates_range():
    ctx = ContextSpec("1d", 1)
    clean = [markov_binary(3000, 0.9, 1)]
    cfg = TrainingConfig(mode="sup-blind", epochs=2, blind_delta_range=(0.05, 0.25))
    init = build_model([8], 0, FULL2, ctx)
    a, _ = train_supervised_blind(clean, 2, (0.05, 0.25), HAM, cfg, init)
    b, _ = train_supervised_blind(clean, 2, (0.05, 0.25), HAM, cfg, init)
    assert same_params(a, b) and a.provenance == "sup-blind"
    with pytest.raises(ValueError):
        train_supervised_blind(clean, 2, (0.05, 0.5), HAM, cfg, init)
    batch_cfg = TrainingConfig(mode="sup-blind", epochs=1, blind_delta_range=(0.05, 0.25), blind_redraw="batch")
    c, hist = train_supervised_blind(clean, 2, (0.05, 0.25), HAM, batch_cfg, init)
    assert len(hist) == 1 and not same_params(c, init)


def test_finetune_from_training_distribution_does_not_hurt():
    ctx = ContextSpec("1d", 2)
    cfg = TrainingConfig(mode="sup", epochs=4)
    sup, _ = train_supervised(supervised_from_clean([markov_binary(60_000, 0.9, 11)], BSC, ctx, cfg), HAM, cfg,
                              build_model([40, 40], 3, FULL2, ctx))
    x = markov_binary(60_000, 0.9, 12)
    z = corrupt(x, BSC, 13)
    ft, _ = finetune(sup, z, BSC, HAM, TrainingConfig(mode="ft", epochs=3))
    assert ft.provenance == "ft"
    assert average_loss(x, ndude_infer_full(ft, z).symbols) <= average_loss(x, ndude_infer_full(sup, z).symbols) + 0.002


def test_finetune_rejects_direct_head():
    m = build_model([4], 0, Head("direct", 2, 2), ContextSpec("1d", 1))
    with pytest.raises(ValueError):
        finetune(m, np.zeros(10, dtype=np.uint8), BSC, HAM, TrainingConfig(mode="ft", epochs=1))


def test_pseudo_rejects_incompatible_init():
    m = build_model([4], 0, Head("full", 4, 4), ContextSpec("1d", 1))
    with pytest.raises(ValueError):
        train_pseudo(np.zeros(10, dtype=np.uint8), BSC, HAM, TrainingConfig(epochs=1), m)


def test_vanilla_sl_learns_identity_on_noiseless_pairs():
    ctx = ContextSpec("1d", 1)
    clean = [markov_binary(5000, 0.7, 2)]
    pairs = make_pairs(clean, build_bsc(0.0), ctx, make_rng(0), with_center=True)
    cfg = TrainingConfig(mode="sl", epochs=4, learning_rate=1e-2)
    init = build_model([8], 0, Head("direct", 2, 2), ctx)
    m, _ = train_vanilla_sl(pairs, cfg, init)
    m2, _ = train_vanilla_sl(pairs, cfg, init)
    assert same_params(m, m2) and m.provenance == "sl"
    npt.assert_array_equal(sl_infer(m, clean[0]).symbols, clean[0])
    with pytest.raises(ValueError):
        train_vanilla_sl(pairs, cfg, build_model([8], 0, FULL2, ctx))


def test_training_log_csv(tmp_path):
    m, hist = train_pseudo(corrupt(markov_binary(800, 0.9, 0), BSC, 0), BSC, HAM, TrainingConfig(epochs=3),
                           build_model([4], 0, FULL2, ContextSpec("1d", 1)))
    write_log(hist, tmp_path / "log.csv")
    rows = list(csv.reader(open(tmp_path / "log.csv")))
    assert rows[0] == ["epoch", "objective", "wall_seconds"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
    assert float(rows[1][1]) == hist[0].objective
