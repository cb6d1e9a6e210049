import numpy as np
import numpy.testing as npt
import pytest

from ndude.channel import build_bsc, build_qsc
from ndude.data import (
    BinaryImage,
    FormatError,
    ReadSet,
    ReferenceSequence,
    corrupt,
    format_fasta,
    format_pbm,
    generate_reads,
    indices_to_dna,
    load_reads,
    make_rng,
    make_synthetic_reference,
    markov_binary,
    mutate_reference,
    parse_fasta,
    parse_pbm,
    pattern_corpus,
    pattern_image,
    PATTERNS,
    save_reads,
    write_manifest_sidecar,
)


def test_pbm_plain_example():
    img = parse_pbm(b"P1\n2 2\n0 1\n1 0\n")
    npt.assert_array_equal(img.bits.reshape(-1), [0, 1, 1, 0])


def test_pbm_comments_and_packed_digits():
    img = parse_pbm(b"P1 # a comment\n# another\n3 2\n011 # trailing\n100\n")
    npt.assert_array_equal(img.bits, [[0, 1, 1], [1, 0, 0]])


def test_pbm_raw_width_10_pads_rows():
    bits = np.zeros((2, 10), dtype=np.uint8)
    bits[0, 0] = bits[0, 9] = bits[1, 8] = 1
    data = format_pbm(BinaryImage(bits))
    header = b"P4\n10 2\n"
    assert data.startswith(header)
    payload = data[len(header):]
    assert len(payload) == 4  # two bytes per row
    assert payload == bytes([0b10000000, 0b01000000, 0b00000000, 0b10000000])
    npt.assert_array_equal(parse_pbm(data).bits, bits)


def test_pbm_fuzz_round_trip():
    rng = make_rng(0)
    for i in range(1000):
        h, w = rng.integers(1, 20, size=2)
        bits = rng.integers(0, 2, size=(h, w)).astype(np.uint8)
        plain = bool(i % 2)
        npt.assert_array_equal(parse_pbm(format_pbm(BinaryImage(bits), plain)).bits, bits)


@pytest.mark.parametrize("data", [b"P2\n2 2\n", b"P1\n2\n", b"P1\n2 2\n0 1\n", b"P4\n16 2\n\x00", b"P1\n0 2\n"])
def test_pbm_malformed(data):
    with pytest.raises(FormatError):
        parse_pbm(data)


def test_fasta_examples():
    recs = parse_fasta(">r1\nACGT\n")
    assert recs[0][0] == "r1"
    npt.assert_array_equal(recs[0][1], [0, 1, 2, 3])
    multi = parse_fasta(">x\nAC\ngt\n>y\nTT\n")
    npt.assert_array_equal(multi[0][1], [0, 1, 2, 3])
    assert [n for n, _ in multi] == ["x", "y"]


def test_fasta_rejects_n_with_position():
    with pytest.raises(FormatError, match="position 4"):
        parse_fasta(">r\nACGN\n")


def test_fasta_requires_header():
    with pytest.raises(FormatError):
        parse_fasta("ACGT\n")


def test_fasta_fuzz_round_trip(tmp_path):
    rng = make_rng(1)
    for i in range(1000):
        n = int(rng.integers(1, 5))
        recs = [(f"s{i}_{j}", rng.integers(0, 4, size=int(rng.integers(1, 90))).astype(np.uint8)) for j in range(n)]
        back = parse_fasta(format_fasta(recs, width=int(rng.integers(0, 3)) * 30))
        assert [a for a, _ in back] == [a for a, _ in recs]
        for (_, a), (_, b) in zip(recs, back):
            npt.assert_array_equal(a, b)
    rs = ReadSet(rng.integers(0, 4, size=(5, 12)).astype(np.uint8))
    save_reads(rs, tmp_path / "r.fa")
    back = load_reads(tmp_path / "r.fa")
    npt.assert_array_equal(back.reads, rs.reads)
    assert back.ids == rs.ids
    assert "acgt" not in (tmp_path / "r.fa").read_text()


def test_corrupt_noiseless_is_identity():
    x = make_rng(2).integers(0, 4, size=1000).astype(np.uint8)
    npt.assert_array_equal(corrupt(x, build_qsc(4, 0.0), 3), x)
    b = (x % 2).astype(np.uint8)
    npt.assert_array_equal(corrupt(b, build_bsc(0.0), 3), b)


def test_corrupt_flip_rate_and_determinism():
    x = np.zeros(1_000_000, dtype=np.uint8)
    z = corrupt(x, build_bsc(0.1), 42)
    assert 0.099 <= z.mean() <= 0.101
    npt.assert_array_equal(z, corrupt(x, build_bsc(0.1), 42))


def test_corrupt_qsc_substitutions_uniform():
    x = np.zeros(300_000, dtype=np.uint8)
    z = corrupt(x, build_qsc(4, 0.3), 5)
    freq = np.bincount(z, minlength=4) / z.size
    assert abs(freq[0] - 0.7) < 0.005
    npt.assert_allclose(freq[1:], 0.1, atol=0.005)


def test_corrupt_rejects_out_of_alphabet():
    with pytest.raises(ValueError):
        corrupt(np.array([0, 2]), build_bsc(0.1), 0)


def test_mutate_reference():
    ref = make_synthetic_reference(100_000, 1)
    same = mutate_reference(ref, 0.0, 2)
    npt.assert_array_equal(same.symbols, ref.symbols)
    mut = mutate_reference(ref, 0.01, 2)
    rate = np.mean(mut.symbols != ref.symbols)
    assert 0.008 <= rate <= 0.012
    npt.assert_array_equal(mut.symbols, mutate_reference(ref, 0.01, 2).symbols)
    with pytest.raises(ValueError):
        mutate_reference(ref, 1.0, 0)


def test_mutation_shift_covers_other_bases():
    ref = ReferenceSequence(np.zeros(50_000, dtype=np.uint8))
    mut = mutate_reference(ref, 0.5, 3).symbols
    changed = mut[mut != 0]
    assert set(np.unique(changed)) == {1, 2, 3}
    npt.assert_allclose(np.bincount(changed)[1:] / changed.size, 1 / 3, atol=0.02)


def test_generate_reads_defaults_and_substrings():
    ref = make_synthetic_reference(5000, 4)
    rs = generate_reads(ref, seed=1)
    assert rs.reads.shape == (6000, 200)
    text = indices_to_dna(ref.symbols)
    for i in range(0, 6000, 500):
        read = indices_to_dna(rs.reads[i])
        assert text.find(read) >= 0
        assert text[rs.offsets[i]: rs.offsets[i] + 200] == read
    assert generate_reads(ref, 50, 0, 0).reads.shape == (0, 50)
    with pytest.raises(ValueError):
        generate_reads(ref, 5001, 1, 0)


def test_synthetic_reference_statistics():
    iid = make_synthetic_reference(1_000_000, 7)
    freq = np.bincount(iid.symbols, minlength=4) / 1e6
    assert np.all((freq >= 0.248) & (freq <= 0.252))
    mk = make_synthetic_reference(200_000, 7, "markov", 0.9)
    repeat = np.mean(mk.symbols[1:] == mk.symbols[:-1])
    assert abs(repeat - 0.9) <= 0.01
    npt.assert_array_equal(mk.symbols, make_synthetic_reference(200_000, 7, "markov", 0.9).symbols)
    with pytest.raises(ValueError):
        make_synthetic_reference(0, 1)


def test_empty_reference_rejected():
    with pytest.raises(ValueError):
        ReferenceSequence(np.array([], dtype=np.uint8))


def test_markov_binary_repeat_rate():
    x = markov_binary(200_000, 0.9, 0)
    assert abs(np.mean(x[1:] == x[:-1]) - 0.9) < 0.01


@pytest.mark.parametrize("kind", PATTERNS)
def test_patterns_are_binary_and_nontrivial(kind):
    img = pattern_image(kind, 64, 3)
    assert img.shape == (64, 64) and img.dtype == np.uint8
    assert 0.02 < img.mean() < 0.98
    npt.assert_array_equal(img, pattern_image(kind, 64, 3))


def test_pattern_corpus_seeded():
    a = pattern_corpus(["blobs", "rings"], 32, 5)
    b = pattern_corpus(["blobs", "rings"], 32, 5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_manifest_sidecar(tmp_path):
    side = write_manifest_sidecar(tmp_path / "out.pbm", "bsc:0.1", 7)
    assert side.name == "out.pbm.corruption.txt"
    assert side.read_text() == "channel=bsc:0.1\nseed=7\n"
