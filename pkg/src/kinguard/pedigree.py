"""Synthetic population and relative generation plus ground-truth records.

Populations are sampled under Hardy-Weinberg equilibrium; relatives are
produced by Mendelian allele transmission (a parent with genotype g passes
a minor allele with probability g/2), with fresh Hardy-Weinberg mates.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dataset import GenotypeDataset
from .errors import BadFrequency, MissingTruth, UnknownParent

UNRELATED = "unrelated"


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class PedigreeTruth:
    """Ground-truth relatedness registry for experiment scoring.

    Only related pairs are stored; any other pair of known samples is
    unrelated. `sample_ids` is the universe of samples the truth covers.
    """

    sample_ids: set[str] = field(default_factory=set)
    pairs: dict[tuple[str, str], int] = field(default_factory=dict)

    def add(self, id_a: str, id_b: str, degree: int) -> None:
        self.sample_ids.update((id_a, id_b))
        self.pairs[_pair_key(id_a, id_b)] = degree

    def degree_of(self, id_a: str, id_b: str) -> int | str:
        if id_a not in self.sample_ids or id_b not in self.sample_ids:
            missing = id_a if id_a not in self.sample_ids else id_b
            raise MissingTruth(f"sample {missing!r} not covered by truth")
        return self.pairs.get(_pair_key(id_a, id_b), UNRELATED)

    @property
    def related_pairs(self) -> dict[tuple[str, str], int]:
        return dict(self.pairs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id1", "id2", "degree"])
        for (a, b), degree in sorted(self.pairs.items()):
            writer.writerow([a, b, degree])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, sample_ids=()) -> "PedigreeTruth":
        truth = cls(sample_ids=set(sample_ids))
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header and header[0] != "id1":  # headerless files are accepted
            reader = csv.reader(io.StringIO(text))
        for row in reader:
            if not row:
                continue
            truth.add(row[0], row[1], int(row[2]))
        return truth


def _check_frequencies(freqs: np.ndarray) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=np.float64)
    if ((freqs < 0) | (freqs > 0.5)).any():
        raise BadFrequency("allele frequencies must lie in [0, 0.5]")
    return freqs


def sample_genotypes(n: int, freqs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw an (n, s) Hardy-Weinberg genotype matrix: two Bernoulli alleles."""
    freqs = _check_frequencies(freqs)
    s = len(freqs)
    alleles = rng.random((2, n, s)) < freqs
    return (alleles[0].astype(np.int8) + alleles[1].astype(np.int8))


def generate_population(
    n: int,
    freqs: np.ndarray,
    seed: int,
    id_prefix: str = "s",
) -> GenotypeDataset:
    """Generate n unrelated Hardy-Weinberg samples; deterministic per seed."""
    if n < 1:
        raise BadFrequency("population size must be >= 1")
    rng = np.random.default_rng(seed)
    matrix = sample_genotypes(n, freqs, rng)
    sample_ids = tuple(f"{id_prefix}{i:04d}" for i in range(n))
    snp_ids = tuple(f"rs{j:06d}" for j in range(len(np.atleast_1d(freqs))))
    return GenotypeDataset(sample_ids, snp_ids, matrix)


def mendelian_child(
    parent_a: np.ndarray,
    parent_b: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """One Mendelian transmission step: each parent passes one allele."""
    a = rng.random(parent_a.shape) < parent_a / 2.0
    b = rng.random(parent_b.shape) < parent_b / 2.0
    return a.astype(np.int8) + b.astype(np.int8)


def generate_relative(
    dataset: GenotypeDataset,
    parent_id: str,
    degree: int,
    freqs: np.ndarray,
    seed: int,
    child_id: str | None = None,
) -> tuple[np.ndarray, tuple[str, str, int]]:
    """Generate a first-degree child or second-degree grandchild of a sample.

    Degree 1 is a direct child with a fresh Hardy-Weinberg mate; degree 2 is
    a grandchild via two successive Mendelian steps with fresh mates.
    Returns the genotype row and the (parent, child, degree) truth entry.
    """
    if parent_id not in dataset.sample_ids:
        raise UnknownParent(parent_id)
    if degree not in (1, 2):
        raise BadFrequency(f"relative degree must be 1 or 2, got {degree}")
    freqs = _check_frequencies(freqs)
    rng = np.random.default_rng(seed)
    founder = dataset.row(parent_id)
    mate = sample_genotypes(1, freqs, rng)[0]
    child = mendelian_child(founder, mate, rng)
    if degree == 2:
        mate2 = sample_genotypes(1, freqs, rng)[0]
        child = mendelian_child(child, mate2, rng)
    if child_id is None:
        child_id = f"{parent_id}-d{degree}"
    return child, (parent_id, child_id, degree)


@dataclass(frozen=True)
class StudyPopulation:
    """Two researcher datasets with relative pairs straddling the partition."""

    researcher_a: GenotypeDataset
    researcher_b: GenotypeDataset
    truth: PedigreeTruth
    freqs: np.ndarray


def build_study_population(
    n_unrelated: int,
    n_first: int,
    n_second: int,
    freqs: np.ndarray,
    seed: int,
) -> StudyPopulation:
    """Build the evaluation population: unrelated founders in one dataset,
    their planted first/second-degree relatives in the other, so every
    related pair is a cross-dataset pair.
    """
    if n_first + n_second > n_unrelated:
        raise BadFrequency("more relatives requested than available founders")
    freqs = _check_frequencies(freqs)
    rng = np.random.default_rng(seed)
    founders = generate_population(
        n_unrelated, freqs, int(rng.integers(2**63)), id_prefix="a"
    )

    truth = PedigreeTruth(sample_ids=set(founders.sample_ids))
    rel_ids: list[str] = []
    rel_rows: list[np.ndarray] = []
    founder_idx = rng.permutation(n_unrelated)
    k = 0
    for degree, count in ((1, n_first), (2, n_second)):
        for _ in range(count):
            pid = founders.sample_ids[founder_idx[k]]
            cid = f"b{k:04d}"
            row, entry = generate_relative(
                founders, pid, degree, freqs, int(rng.integers(2**63)), child_id=cid
            )
            rel_ids.append(cid)
            rel_rows.append(row)
            truth.add(*entry)
            k += 1

    rel_matrix = (np.array(rel_rows, dtype=np.int8) if rel_rows
                  else np.zeros((0, founders.n_snps), dtype=np.int8))
    relatives = GenotypeDataset(tuple(rel_ids), founders.snp_ids, rel_matrix)
    truth.sample_ids.update(relatives.sample_ids)
    return StudyPopulation(founders, relatives, truth, freqs)
