"""Genotype data model, TSV ingestion, and population statistics.

Genotypes are minor-allele counts in {0, 1, 2} at biallelic SNPs. A dataset
is a rectangular sample-by-SNP matrix with unique sample and SNP identifiers.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateSampleId,
    DuplicateSnpId,
    EmptyInput,
    IndexOutOfRange,
    LengthMismatch,
    NonGenotypeValue,
    RaggedRow,
    SameSnp,
)

VALID_GENOTYPES = frozenset({0, 1, 2})


@dataclass(frozen=True)
class GenotypeDataset:
    """Immutable n-samples x s-SNPs matrix of minor-allele counts."""

    sample_ids: tuple[str, ...]
    snp_ids: tuple[str, ...]
    matrix: np.ndarray  # (n, s) int8, values in {0,1,2}

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.int8)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        n, s = mat.shape
        if len(self.sample_ids) != n:
            raise RaggedRow(f"{len(self.sample_ids)} sample ids for {n} rows")
        if len(self.snp_ids) != s:
            raise RaggedRow(f"{len(self.snp_ids)} SNP ids for {s} columns")
        if len(set(self.sample_ids)) != n:
            raise DuplicateSampleId("sample ids are not unique")
        if len(set(self.snp_ids)) != s:
            raise DuplicateSnpId("SNP ids are not unique")
        bad = (mat < 0) | (mat > 2)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise NonGenotypeValue(
                f"value {mat[i, j]} at sample {self.sample_ids[i]!r}, "
                f"SNP {self.snp_ids[j]!r}"
            )

    @property
    def n_samples(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_snps(self) -> int:
        return self.matrix.shape[1]

    def row(self, sample_id: str) -> np.ndarray:
        return self.matrix[self.sample_ids.index(sample_id)]

    def snp_index(self, snp_id: str) -> int:
        return self.snp_ids.index(snp_id)


def parse_dataset(text: str | io.TextIOBase) -> GenotypeDataset:
    """Parse the whitespace-separated genotype format.

    First line is the SNP-id header; each following line is a sample id
    followed by one genotype token per SNP. Row and column order is
    preserved.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = text.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise EmptyInput("no content")
    snp_ids = tuple(lines[0].split())
    if not snp_ids:
        raise EmptyInput("empty SNP header")
    if len(lines) < 2:
        raise EmptyInput("no sample rows")

    sample_ids: list[str] = []
    rows: list[list[int]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        sid, values = tokens[0], tokens[1:]
        if len(values) != len(snp_ids):
            raise RaggedRow(
                f"line {lineno}: expected {len(snp_ids)} genotypes, "
                f"got {len(values)}"
            )
        row = []
        for tok in values:
            if tok not in ("0", "1", "2"):
                raise NonGenotypeValue(f"line {lineno}: {tok!r}")
            row.append(int(tok))
        sample_ids.append(sid)
        rows.append(row)
    # duplicate checks are re-done by the constructor; done here first to
    # report the ingestion error class before matrix assembly
    if len(set(sample_ids)) != len(sample_ids):
        raise DuplicateSampleId("duplicate sample id in input")
    if len(set(snp_ids)) != len(snp_ids):
        raise DuplicateSnpId("duplicate SNP id in header")
    return GenotypeDataset(tuple(sample_ids), snp_ids, np.array(rows, dtype=np.int8))


def write_dataset(dataset: GenotypeDataset) -> str:
    """Serialize in the same format `parse_dataset` reads, byte-stably."""
    out = [" ".join(dataset.snp_ids)]
    for sid, row in zip(dataset.sample_ids, dataset.matrix):
        out.append(sid + " " + " ".join(str(int(v)) for v in row))
    return "\n".join(out) + "\n"


def compute_maf(dataset: GenotypeDataset) -> np.ndarray:
    """Per-SNP minor allele frequency: column allele sum over 2n.

    The encoding is taken as given; a column frequency above 0.5 only
    triggers a warning, never an allele flip.
    """
    maf = dataset.matrix.sum(axis=0, dtype=np.float64) / (2 * dataset.n_samples)
    if (maf > 0.5).any():
        warnings.warn(
            "some columns have allele frequency > 0.5; encoding kept as-is",
            stacklevel=2,
        )
    return maf


def maf_of_matrix(matrix: np.ndarray) -> np.ndarray:
    """MAF vector of a bare genotype matrix (rows = samples)."""
    matrix = np.asarray(matrix)
    return matrix.sum(axis=0, dtype=np.float64) / (2 * matrix.shape[0])


def compute_joint_table(dataset: GenotypeDataset, snp_a: int, snp_b: int) -> np.ndarray:
    """Empirical 3x3 joint genotype frequency table for a SNP pair."""
    s = dataset.n_snps
    for idx in (snp_a, snp_b):
        if not 0 <= idx < s:
            raise IndexOutOfRange(f"SNP index {idx} out of range for {s} SNPs")
    if snp_a == snp_b:
        raise SameSnp(f"joint table needs two distinct SNPs, got {snp_a} twice")
    return joint_table_of_columns(dataset.matrix[:, snp_a], dataset.matrix[:, snp_b])


def joint_table_of_columns(col_a: np.ndarray, col_b: np.ndarray) -> np.ndarray:
    counts = np.bincount(3 * col_a.astype(np.intp) + col_b, minlength=9)
    return counts.reshape(3, 3) / len(col_a)


def all_joint_tables(matrix: np.ndarray) -> np.ndarray:
    """All pairwise joint tables of a genotype matrix at once.

    Returns a (m, m, 3, 3) array T with T[a, b, u, v] the empirical
    frequency of (u at column a, v at column b). Diagonal entries hold the
    degenerate self-tables and are never consulted by callers.
    """
    matrix = np.asarray(matrix)
    n, m = matrix.shape
    onehot = np.zeros((3, n, m), dtype=np.float32)
    for v in range(3):
        onehot[v] = matrix == v
    # T[a,b,u,v] = sum_j onehot[u,j,a] * onehot[v,j,b] / n
    tables = np.einsum("una,vnb->abuv", onehot, onehot, optimize=True) / n
    return tables.astype(np.float64)


def table_distance(t1: np.ndarray, t2: np.ndarray) -> float:
    """L1 distance between two joint tables; a metric bounded by 2."""
    return float(np.abs(np.asarray(t1) - np.asarray(t2)).sum())


def hamming_distance(g1: np.ndarray, g2: np.ndarray) -> int:
    g1 = np.asarray(g1)
    g2 = np.asarray(g2)
    if g1.shape != g2.shape:
        raise LengthMismatch(f"rows of length {g1.shape} vs {g2.shape}")
    return int((g1 != g2).sum())
