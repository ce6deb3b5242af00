"""Bit-packed genotype rows and the popcount KING counting kernel.

Each genotype in {0,1,2} occupies 2 bits split across two bitplanes
(low bit, high bit), packed into 64-bit words. Heterozygosity and
homozygote-opposition counts then reduce to bitwise ANDs plus population
counts, which is the performance core of the pairwise kinship loop.
All interfaces outside this module speak in {0,1,2} values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch


@dataclass(frozen=True)
class KingCounts:
    n11: int      # both rows heterozygous
    n02: int      # row i homozygous 0, row j homozygous 2
    n20: int      # row i homozygous 2, row j homozygous 0
    n1star: int   # row i heterozygous
    nstar1: int   # row j heterozygous

    def __post_init__(self):
        assert self.n11 <= min(self.n1star, self.nstar1)


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, m) 0/1 matrix into (n, ceil(m/64)) uint64 words."""
    n, m = bits.shape
    n_bytes = -(-m // 8)
    padded_bytes = -(-n_bytes // 8) * 8
    packed = np.zeros((n, padded_bytes), dtype=np.uint8)
    packed[:, :n_bytes] = np.packbits(bits, axis=1, bitorder="little")
    return packed.view(np.uint64)


@dataclass(frozen=True)
class PackedRows:
    """Bitplane representation of a genotype matrix (rows = samples)."""

    het: np.ndarray    # (n, words) uint64, bit set where value == 1
    hom0: np.ndarray   # bit set where value == 0
    hom2: np.ndarray   # bit set where value == 2
    n_snps: int

    @classmethod
    def pack(cls, matrix: np.ndarray) -> "PackedRows":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.uint8))
        het = _pack_bits(matrix == 1)
        hom0 = _pack_bits(matrix == 0)
        hom2 = _pack_bits(matrix == 2)
        return cls(het, hom0, hom2, matrix.shape[1])

    @property
    def n_rows(self) -> int:
        return self.het.shape[0]


def _popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def king_counts_packed(rows: PackedRows, i: int, rows_j: PackedRows, j: int) -> KingCounts:
    """KING counts for one pair via the popcount kernel."""
    if rows.n_snps != rows_j.n_snps:
        raise LengthMismatch(f"{rows.n_snps} vs {rows_j.n_snps} SNPs")
    het_i, het_j = rows.het[i], rows_j.het[j]
    return KingCounts(
        n11=int(_popcount(het_i & het_j)),
        n02=int(_popcount(rows.hom0[i] & rows_j.hom2[j])),
        n20=int(_popcount(rows.hom2[i] & rows_j.hom0[j])),
        n1star=int(_popcount(het_i)),
        nstar1=int(_popcount(het_j)),
    )


def king_counts_block(rows_i: PackedRows, i: int, rows_j: PackedRows) -> dict[str, np.ndarray]:
    """Counts of row i against every row of `rows_j`, vectorized."""
    if rows_i.n_snps != rows_j.n_snps:
        raise LengthMismatch(f"{rows_i.n_snps} vs {rows_j.n_snps} SNPs")
    het_i = rows_i.het[i]
    return {
        "n11": _popcount(het_i & rows_j.het),
        "n02": _popcount(rows_i.hom0[i] & rows_j.hom2),
        "n20": _popcount(rows_i.hom2[i] & rows_j.hom0),
        "n1star": np.full(rows_j.n_rows, _popcount(het_i)),
        "nstar1": _popcount(rows_j.het),
    }


def king_counts_reference(g_i: np.ndarray, g_j: np.ndarray) -> KingCounts:
    """Position-by-position reference loop; the oracle for the kernel."""
    g_i = np.asarray(g_i)
    g_j = np.asarray(g_j)
    if g_i.shape != g_j.shape:
        raise LengthMismatch(f"rows of length {g_i.shape} vs {g_j.shape}")
    return KingCounts(
        n11=int(np.sum((g_i == 1) & (g_j == 1))),
        n02=int(np.sum((g_i == 0) & (g_j == 2))),
        n20=int(np.sum((g_i == 2) & (g_j == 0))),
        n1star=int(np.sum(g_i == 1)),
        nstar1=int(np.sum(g_j == 1)),
    )
