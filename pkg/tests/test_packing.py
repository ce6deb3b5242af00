import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinguard.errors import LengthMismatch
from kinguard.packing import (
    KingCounts,
    PackedRows,
    king_counts_block,
    king_counts_packed,
    king_counts_reference,
)


def test_reference_hand_case():
    g_i = np.array([0, 1, 2, 1, 0, 2])
    g_j = np.array([2, 1, 0, 0, 0, 2])
    counts = king_counts_reference(g_i, g_j)
    assert counts == KingCounts(n11=1, n02=1, n20=1, n1star=2, nstar1=1)


def test_reference_length_mismatch():
    with pytest.raises(LengthMismatch):
        king_counts_reference(np.array([0, 1]), np.array([0, 1, 2]))


def test_packed_matches_reference_simple():
    g_i = np.array([0, 1, 2, 1, 0, 2])
    g_j = np.array([2, 1, 0, 0, 0, 2])
    packed = PackedRows.pack(np.vstack([g_i, g_j]))
    assert king_counts_packed(packed, 0, packed, 1) == king_counts_reference(g_i, g_j)


@pytest.mark.parametrize("length", [1, 7, 8, 63, 64, 65, 128, 200, 377])
def test_packed_matches_reference_lengths(length):
    # lengths straddling byte and word boundaries exercise the padding
    rng = np.random.default_rng(length)
    mat = rng.integers(0, 3, size=(6, length)).astype(np.int8)
    packed = PackedRows.pack(mat)
    for i in range(6):
        for j in range(6):
            assert king_counts_packed(packed, i, packed, j) == \
                king_counts_reference(mat[i], mat[j])


def test_block_matches_pairwise():
    rng = np.random.default_rng(9)
    mat = rng.integers(0, 3, size=(20, 130)).astype(np.int8)
    packed = PackedRows.pack(mat)
    block = king_counts_block(packed, 3, packed)
    for j in range(20):
        single = king_counts_packed(packed, 3, packed, j)
        assert block["n11"][j] == single.n11
        assert block["n02"][j] == single.n02
        assert block["n20"][j] == single.n20
        assert block["n1star"][j] == single.n1star
        assert block["nstar1"][j] == single.nstar1


def test_block_length_mismatch():
    a = PackedRows.pack(np.zeros((2, 10), dtype=np.int8))
    b = PackedRows.pack(np.zeros((2, 11), dtype=np.int8))
    with pytest.raises(LengthMismatch):
        king_counts_block(a, 0, b)
    with pytest.raises(LengthMismatch):
        king_counts_packed(a, 0, b, 0)


@given(st.integers(1, 300), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_packed_equals_reference_property(length, seed):
    rng = np.random.default_rng(seed)
    g_i = rng.integers(0, 3, length).astype(np.int8)
    g_j = rng.integers(0, 3, length).astype(np.int8)
    packed = PackedRows.pack(np.vstack([g_i, g_j]))
    got = king_counts_packed(packed, 0, packed, 1)
    want = king_counts_reference(g_i, g_j)
    assert got == want
    # structural invariant: joint heterozygosity can't exceed either margin
    assert got.n11 <= min(got.n1star, got.nstar1)
