"""Server-side KING kinship estimation, degree classification, and scoring.

The kinship coefficient between rows i and j is

    phi = (2*n11 - 4*(n02 + n20) - nstar1 + n1star) / (4 * n1star)

with counts defined over the shared SNP positions. A row with no
heterozygous sites (n1star = 0) has an undefined coefficient; we classify
it as unrelated rather than fabricate relatedness.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ColumnCountMismatch, LengthMismatch, MissingTruth
from .packing import KingCounts, PackedRows, king_counts_block, king_counts_reference
from .pedigree import UNRELATED, PedigreeTruth

# Degree thresholds on phi: > 0.35 duplicate, > 0.175 first, > 0.08 second.
THRESHOLD_DUPLICATE = 0.35
THRESHOLD_FIRST = 0.175
THRESHOLD_SECOND = 0.08


class KinshipDegree(enum.Enum):
    DUPLICATE = 0
    FIRST = 1
    SECOND = 2
    UNRELATED = "unrelated"

    @property
    def label(self) -> str:
        return {0: "dup", 1: "1st", 2: "2nd", "unrelated": "unrel"}[self.value]

    @classmethod
    def from_label(cls, label: str) -> "KinshipDegree":
        return {"dup": cls.DUPLICATE, "1st": cls.FIRST,
                "2nd": cls.SECOND, "unrel": cls.UNRELATED}[label]


def king_counts(g_i, g_j) -> KingCounts:
    """KING counts for two genotype rows (reference path)."""
    return king_counts_reference(g_i, g_j)


def king_coefficient(counts: KingCounts) -> float:
    """Phi from counts; NaN stands for the undefined n1star = 0 case."""
    if counts.n1star == 0:
        return math.nan
    numer = (2 * counts.n11 - 4 * (counts.n02 + counts.n20)
             - counts.nstar1 + counts.n1star)
    return numer / (4 * counts.n1star)


def classify_degree(phi: float) -> KinshipDegree:
    """Thresholds are strict: equality falls to the weaker relationship."""
    if math.isnan(phi):
        return KinshipDegree.UNRELATED
    if phi > THRESHOLD_DUPLICATE:
        return KinshipDegree.DUPLICATE
    if phi > THRESHOLD_FIRST:
        return KinshipDegree.FIRST
    if phi > THRESHOLD_SECOND:
        return KinshipDegree.SECOND
    return KinshipDegree.UNRELATED


@dataclass(frozen=True)
class ReportEntry:
    id_a: str
    id_b: str
    phi: float
    degree: KinshipDegree
    phi_reverse: float | None = None  # phi with the orientation swapped


@dataclass(frozen=True)
class KinshipReport:
    entries: tuple[ReportEntry, ...]
    scope: str  # "cross-only" or "all-pairs"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id_a", "id_b", "phi", "degree"])
        for e in self.entries:
            writer.writerow([e.id_a, e.id_b, f"{e.phi:.6f}", e.degree.label])
        return buf.getvalue()


def _phi_vec(counts: dict[str, np.ndarray]) -> np.ndarray:
    numer = (2 * counts["n11"] - 4 * (counts["n02"] + counts["n20"])
             - counts["nstar1"] + counts["n1star"]).astype(np.float64)
    denom = 4.0 * counts["n1star"]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(counts["n1star"] == 0, np.nan, numer / denom)


def pairwise_kinship(
    metadatas,
    scope: str = "cross-only",
    both_orientations: bool = False,
) -> KinshipReport:
    """KING report over every unordered pair in scope.

    `metadatas` is a sequence of objects with `row_ids` and `matrix`
    attributes (one per researcher). `cross-only` restricts to pairs from
    different metadatas. Phi is computed with row i = the lexicographically
    smaller pseudonym; pass `both_orientations` to also record the swap.
    """
    if scope not in ("cross-only", "all-pairs"):
        raise ValueError(f"unknown scope {scope!r}")
    widths = {md.matrix.shape[1] for md in metadatas}
    if len(widths) > 1:
        raise ColumnCountMismatch(f"column counts differ: {sorted(widths)}")

    ids: list[str] = []
    origin: list[int] = []
    blocks = []
    for k, md in enumerate(metadatas):
        ids.extend(md.row_ids)
        origin.extend([k] * len(md.row_ids))
        blocks.append(np.asarray(md.matrix))
    full = np.vstack(blocks)
    packed = PackedRows.pack(full)
    origin_arr = np.array(origin)
    total = len(ids)

    entries: list[ReportEntry] = []
    for i in range(total):
        js = np.arange(i + 1, total)
        if scope == "cross-only":
            js = js[origin_arr[js] != origin_arr[i]]
        if js.size == 0:
            continue
        counts = king_counts_block(packed, i, packed)
        phi_ij = _phi_vec(counts)
        # reverse orientation: swap the roles of the asymmetric count terms
        rev = {
            "n11": counts["n11"], "n02": counts["n20"], "n20": counts["n02"],
            "n1star": counts["nstar1"],
            "nstar1": counts["n1star"],
        }
        phi_ji = _phi_vec(rev)
        for j in js:
            a, b = ids[i], ids[j]
            if a <= b:
                phi, phi_rev = float(phi_ij[j]), float(phi_ji[j])
            else:
                a, b = b, a
                phi, phi_rev = float(phi_ji[j]), float(phi_ij[j])
            entries.append(ReportEntry(
                a, b, phi, classify_degree(phi),
                phi_reverse=phi_rev if both_orientations else None,
            ))
    entries.sort(key=lambda e: (e.id_a, e.id_b))
    return KinshipReport(tuple(entries), scope)


@dataclass(frozen=True)
class KinshipMetrics:
    accuracy: float     # correct degree labels among truly related pairs
    precision: float
    recall: float
    accuracy_all_pairs: float  # literal reading: denominator = all pairs


def kinship_metrics(
    report: KinshipReport,
    truth: PedigreeTruth,
    id_map: dict[str, str] | None = None,
) -> KinshipMetrics:
    """Score predicted degrees against pedigree truth.

    `id_map` translates report pseudonyms back to truth sample ids; pairs
    whose pseudonyms are absent from the map (synthetic rows) must be
    filtered out before scoring.
    """
    degree_to_truth = {KinshipDegree.DUPLICATE: 0, KinshipDegree.FIRST: 1,
                       KinshipDegree.SECOND: 2, KinshipDegree.UNRELATED: UNRELATED}
    n_related = correct = 0
    tp = predicted_pos = actual_pos = 0
    correct_all = 0
    for e in report.entries:
        a = id_map.get(e.id_a, e.id_a) if id_map else e.id_a
        b = id_map.get(e.id_b, e.id_b) if id_map else e.id_b
        true_degree = truth.degree_of(a, b)
        predicted = degree_to_truth[e.degree]
        if predicted == true_degree:
            correct_all += 1
        if true_degree != UNRELATED:
            actual_pos += 1
            n_related += 1
            if predicted == true_degree:
                correct += 1
            if predicted != UNRELATED:
                tp += 1
        if predicted != UNRELATED:
            predicted_pos += 1
    if n_related == 0:
        raise MissingTruth("truth lists no related pairs to score against")
    return KinshipMetrics(
        accuracy=correct / n_related,
        precision=tp / predicted_pos if predicted_pos else 0.0,
        recall=tp / actual_pos,
        accuracy_all_pairs=correct_all / len(report.entries),
    )
