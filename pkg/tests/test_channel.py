import math

import numpy as np
import pytest

import ejsim as ej
from ejsim.errors import (
    ChannelInvalid,
    DegenerateChannel,
    IndexOutOfRange,
    InfiniteC2,
    NegativeEntry,
    NoConvergence,
    NonStochasticRow,
    NotBinaryInput,
    SearchSpaceTooLarge,
)

from helpers import random_channel, random_symmetric_binary


def binary_entropy(p):
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


# -- validation ----------------------------------------------------------------

def test_validate_bsc_is_strictly_positive(bsc01):
    assert bsc01.num_inputs == 2 and bsc01.num_outputs == 2
    assert bsc01.strictly_positive
    assert np.allclose(bsc01.transition.sum(axis=1), 1.0, atol=1e-15)


def test_validate_rejects_identical_rows():
    with pytest.raises(DegenerateChannel):
        ej.validate_channel([[0.5, 0.5], [0.5, 0.5]])


def test_validate_rejects_single_input_row():
    with pytest.raises(DegenerateChannel):
        ej.validate_channel([[0.3, 0.7]])


def test_validate_rejects_nonstochastic_row():
    with pytest.raises(NonStochasticRow):
        ej.validate_channel([[0.9, 0.2], [0.1, 0.9]])


def test_validate_rejects_negative_entry():
    with pytest.raises(NegativeEntry):
        ej.validate_channel([[1.1, -0.1], [0.5, 0.5]])


def test_validate_renormalizes_small_drift():
    ch = ej.validate_channel([[0.9 + 4e-10, 0.1], [0.1, 0.9 - 4e-10]])
    assert np.all(ch.transition.sum(axis=1) == 1.0)


def test_channel_matrix_is_readonly(bsc01):
    with pytest.raises(ValueError):
        bsc01.transition[0, 0] = 0.5


# -- output sampling -------------------------------------------------------------

def test_sample_point_mass():
    ch = ej.validate_channel([[1.0, 0.0], [0.0, 1.0]])
    for seed in (0, 1, 17):
        rng = np.random.default_rng(seed)
        assert ej.sample_output(ch, 0, rng) == 0
        assert ej.sample_output(ch, 1, rng) == 1


def test_sample_matches_row_frequencies(bsc01):
    n = 1_000_000
    rng = np.random.default_rng(42)
    flips = sum(ej.sample_output(bsc01, 0, rng) for _ in range(n))
    stderr = math.sqrt(0.1 * 0.9 / n)
    assert abs(flips / n - 0.1) <= 3 * stderr


def test_sample_reproducible(bsc01):
    rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
    s1 = [ej.sample_output(bsc01, x % 2, rng1) for x in range(200)]
    s2 = [ej.sample_output(bsc01, x % 2, rng2) for x in range(200)]
    assert s1 == s2


def test_sample_index_out_of_range(bsc01):
    with pytest.raises(IndexOutOfRange):
        ej.sample_output(bsc01, 2, np.random.default_rng(0))


# -- capacity -----------------------------------------------------------------

def test_capacity_bsc_closed_form(bsc01):
    # oracle: C = 1 - H2(0.1) = 0.5310044064107188
    expected = 1.0 - binary_entropy(0.1)
    assert round(expected, 6) == 0.531004
    got = ej.blahut_arimoto(bsc01, tol=1e-9)
    assert abs(got.capacity - expected) <= 1e-6
    assert np.allclose(got.input_dist, [0.5, 0.5], atol=1e-9)


def test_capacity_noiseless_binary_channel():
    ch = ej.validate_channel([[1.0, 0.0], [0.0, 1.0]])
    got = ej.blahut_arimoto(ch)
    assert abs(got.capacity - 1.0) <= 1e-9
    assert np.allclose(got.input_dist, [0.5, 0.5], atol=1e-9)


def test_capacity_ternary_test_channel(ternary):
    got = ej.blahut_arimoto(ternary, tol=1e-9)
    assert np.allclose(got.input_dist, [0.5, 0.5], atol=1e-6)
    # equal-information property of the optimal input law
    mix = got.input_dist @ ternary.transition
    for x in range(2):
        d = ej.kl_divergence(ternary.transition[x], mix)
        assert abs(d - got.capacity) <= 1e-6


def test_capacity_equals_divergence_to_midpoint_for_paired_channels():
    rng = np.random.default_rng(5)
    channels = [ej.bsc(0.1), ej.validate_channel([[0.8, 0.2, 0.0], [0.0, 0.2, 0.8]])]
    channels += [random_symmetric_binary(rng, ny)[0] for ny in (3, 4, 5)]
    for ch in channels:
        p = ch.transition
        mid = 0.5 * (p[0] + p[1])
        cap = ej.blahut_arimoto(ch, tol=1e-12).capacity
        assert abs(cap - ej.kl_divergence(p[0], mid)) <= 1e-9


def test_capacity_no_convergence_when_capped():
    ch = ej.validate_channel([[0.8, 0.2], [0.3, 0.7]])
    with pytest.raises(NoConvergence):
        ej.blahut_arimoto(ch, tol=1e-12, max_iter=1)


# -- C1 / C2 --------------------------------------------------------------------

def test_constants_bsc(bsc01_consts):
    # oracle: C1 = 0.9 log2(9) + 0.1 log2(1/9) = 0.8 log2(9) = 2.5359400011538497
    expected_c1 = 0.8 * math.log2(9.0)
    assert round(expected_c1, 6) == 2.535940
    assert abs(bsc01_consts.c1 - expected_c1) <= 1e-9
    assert abs(bsc01_consts.c2 - 9.0) <= 1e-12
    assert bsc01_consts.c1_pair in ((0, 1), (1, 0))
    c, c1, c2 = bsc01_consts.capacity, bsc01_consts.c1, bsc01_consts.c2
    assert 0 < c <= c1 <= math.log2(c2) <= c2


def test_constants_vanish_for_nearly_useless_channel():
    consts = ej.derive_constants(ej.bsc(0.5 - 1e-3))
    assert consts.c1 < 1e-4
    assert consts.c2 < 1.01


def test_constants_reject_zero_entries():
    ch = ej.validate_channel([[0.8, 0.2, 0.0], [0.0, 0.2, 0.8]])
    with pytest.raises(InfiniteC2):
        ej.channel_constants(ch, ej.blahut_arimoto(ch))


def test_constants_permutation_equivariant():
    rng = np.random.default_rng(11)
    ch = random_channel(rng, 3, 5)
    perm = rng.permutation(5)
    ch2 = ej.validate_channel(ch.transition[:, perm])
    a = ej.derive_constants(ch)
    b = ej.derive_constants(ch2)
    assert a.c1 == b.c1          # fsum-based KL is order independent
    assert a.c2 == b.c2
    assert abs(a.capacity - b.capacity) <= 1e-12


# -- symmetry detection -----------------------------------------------------------

def test_pairing_bsc(bsc01):
    assert ej.detect_symmetric_pairing(bsc01).permutation == (1, 0)


def test_pairing_erasure_like():
    ch = ej.validate_channel([[0.8, 0.2, 0.0], [0.0, 0.2, 0.8]])
    assert ej.detect_symmetric_pairing(ch).permutation == (2, 1, 0)


def test_pairing_absent_for_ternary_test_channel(ternary):
    assert ej.detect_symmetric_pairing(ternary) is None


def test_pairing_random_constructions():
    rng = np.random.default_rng(3)
    for _ in range(10):
        ch, f = random_symmetric_binary(rng, int(rng.integers(2, 7)))
        found = ej.detect_symmetric_pairing(ch)
        assert found is not None
        perm = np.asarray(found.permutation)
        assert np.all(perm[perm] == np.arange(ch.num_outputs))
        assert np.max(np.abs(ch.transition[0] - ch.transition[1, perm])) <= 1e-12


def test_pairing_search_limit_and_candidate():
    rng = np.random.default_rng(8)
    ch, f = random_symmetric_binary(rng, 9)
    with pytest.raises(SearchSpaceTooLarge):
        ej.detect_symmetric_pairing(ch)
    assert ej.detect_symmetric_pairing(ch, candidate=f) is not None
    assert ej.detect_symmetric_pairing(ch, candidate=np.arange(9)) is None


def test_pairing_requires_binary_input():
    ch = ej.kary_symmetric_channel(3, 0.2)
    with pytest.raises(NotBinaryInput):
        ej.detect_symmetric_pairing(ch)


# -- structure probes --------------------------------------------------------------

def test_is_bsc(bsc01, ternary):
    assert ej.channel.is_bsc(bsc01) == pytest.approx(0.1, abs=1e-15)
    assert ej.channel.is_bsc(ternary) is None
    assert ej.channel.is_bsc(ej.bsc(0.6)) is None  # crossover above 1/2


def test_is_kary_symmetric(bsc01):
    ch = ej.kary_symmetric_channel(4, 0.3)
    assert ej.channel.is_kary_symmetric(ch) == pytest.approx(0.3, abs=1e-12)
    assert ej.channel.is_kary_symmetric(bsc01) == pytest.approx(0.1, abs=1e-12)
    rng = np.random.default_rng(2)
    assert ej.channel.is_kary_symmetric(random_channel(rng, 3, 3)) is None


def test_ternary_channel_shape(ternary, ternary_consts):
    assert ternary.num_inputs == 2 and ternary.num_outputs == 3
    assert ternary.strictly_positive
    # orientation: the ordered divergence from row 0 attains the maximum
    p = ternary.transition
    assert ej.kl_divergence(p[0], p[1]) >= ej.kl_divergence(p[1], p[0])
    assert ternary_consts.c1_pair == (0, 1)


# -- file interface ------------------------------------------------------------------

def test_channel_file_roundtrip(tmp_path, bsc01):
    path = tmp_path / "ch.json"
    ej.save_channel(bsc01, path)
    back = ej.load_channel(path)
    assert np.array_equal(back.transition, bsc01.transition)


def test_channel_file_rejects_bad_rows(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"inputs": 2, "outputs": 2, "rows": [[0.9, 0.2], [0.1, 0.9]]}')
    with pytest.raises(NonStochasticRow):
        ej.load_channel(path)


def test_channel_file_rejects_missing_fields(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"rows": [[1.0]]}')
    with pytest.raises(ChannelInvalid):
        ej.load_channel(path)


def test_channel_file_rejects_shape_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"inputs": 2, "outputs": 3, "rows": [[0.5, 0.5], [0.5, 0.5]]}')
    with pytest.raises(ChannelInvalid):
        ej.load_channel(path)


def test_channel_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json")
    with pytest.raises(ChannelInvalid):
        ej.load_channel(path)
