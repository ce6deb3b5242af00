"""The honest-but-curious server's attack surface.

Covers greedy un-shuffling of metadata columns from reference MAFs and
pairwise joint tables, accuracy scoring, simulated partial un-shuffling,
hamming-distance membership inference with FPR-calibrated thresholds, and
the likelihood-ratio baseline that represents the risk already accepted
when summary statistics are shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import GenotypeDataset, all_joint_tables, maf_of_matrix
from .errors import DegenerateSets, KnowledgeIncomplete, LengthMismatch
from .protocol import Metadata, SyncAgreement

DELTA_CORR_DEFAULT = 0.01   # tie window on L1 table distance, tunable
STALL_DISTANCE = 0.5        # re-anchor when even the best table match is this far


@dataclass(frozen=True)
class AdversaryKnowledge:
    """Server-side background: candidate ids, reference MAFs and tables."""

    candidate_ids: tuple[str, ...]         # I', superset of the true panel
    ref_maf: np.ndarray                    # (k,)
    ref_tables: np.ndarray                 # (k, k, 3, 3)

    def __post_init__(self):
        k = len(self.candidate_ids)
        if self.ref_maf.shape != (k,) or self.ref_tables.shape != (k, k, 3, 3):
            raise KnowledgeIncomplete(
                f"reference stats inconsistent with {k} candidate ids"
            )

    @classmethod
    def from_reference(
        cls, dataset: GenotypeDataset, candidate_ids
    ) -> "AdversaryKnowledge":
        """Build exact knowledge from a reference dataset (worst case)."""
        candidate_ids = tuple(candidate_ids)
        col_index = {sid: j for j, sid in enumerate(dataset.snp_ids)}
        try:
            cols = [col_index[sid] for sid in candidate_ids]
        except KeyError as exc:
            raise KnowledgeIncomplete(f"unknown candidate SNP {exc}") from exc
        sub = dataset.matrix[:, cols]
        return cls(candidate_ids, maf_of_matrix(sub), all_joint_tables(sub))


def unshuffle_greedy(
    metadata: Metadata,
    knowledge: AdversaryKnowledge,
    seed: int,
    delta_corr: float = DELTA_CORR_DEFAULT,
) -> dict[int, str]:
    """Greedy column-to-id matching from MAFs and joint-table distances.

    Anchors on the globally closest MAF pair, then repeatedly picks a random
    unassigned candidate id, matches it to the column whose joint table with
    the current anchor is nearest the reference table for that id pair
    (MAF breaks ties within `delta_corr`), and makes the new column the next
    anchor. Re-anchors on the best remaining MAF pair if even the closest
    table is further than the stall threshold.
    """
    matrix = np.asarray(metadata.matrix)
    m = matrix.shape[1]
    k = len(knowledge.candidate_ids)
    if m < 2:
        raise KnowledgeIncomplete("need at least 2 metadata columns")
    if k < m:
        raise KnowledgeIncomplete(f"{k} candidate ids for {m} columns")

    rng = np.random.default_rng(seed)
    maf_meta = maf_of_matrix(matrix)
    meta_tables = all_joint_tables(matrix)

    cols_left = np.ones(m, dtype=bool)
    ids_left = np.ones(k, dtype=bool)
    assignment: dict[int, str] = {}
    assigned_pairs: list[tuple[int, int]] = []  # (column, candidate index)

    def anchor_by_maf() -> tuple[int, int]:
        diff = np.abs(maf_meta[cols_left, None] - knowledge.ref_maf[None, ids_left])
        col_pool = np.flatnonzero(cols_left)
        id_pool = np.flatnonzero(ids_left)
        dmin = diff.min()
        at_min = diff == dmin
        # Tie policy: prefer a minimal pair that is unambiguous in both
        # directions, so an exact-knowledge run cannot anchor on a MAF
        # collision between distinct SNPs.
        rows = at_min.sum(axis=1)
        cols = at_min.sum(axis=0)
        cand = np.argwhere(at_min)
        for ci, ii in cand:
            if rows[ci] == 1 and cols[ii] == 1:
                return int(col_pool[ci]), int(id_pool[ii])
        ci, ii = cand[0]
        return int(col_pool[ci]), int(id_pool[ii])

    def assign(col: int, idx: int) -> None:
        assignment[col] = knowledge.candidate_ids[idx]
        assigned_pairs.append((col, idx))
        cols_left[col] = False
        ids_left[idx] = False

    anchor_col, anchor_id = anchor_by_maf()
    assign(anchor_col, anchor_id)

    while cols_left.any():
        pool = np.flatnonzero(ids_left)
        b = int(pool[rng.integers(len(pool))])
        open_cols = np.flatnonzero(cols_left)
        ref = knowledge.ref_tables[anchor_id, b]
        dists = np.abs(meta_tables[anchor_col, open_cols] - ref).sum(axis=(1, 2))
        dmin = dists.min()
        if dmin > STALL_DISTANCE and len(open_cols) > 1:
            anchor_col, anchor_id = anchor_by_maf()
            assign(anchor_col, anchor_id)
            continue
        near = dists <= dmin + delta_corr
        candidates = open_cols[near]
        if len(candidates) > 1:
            # MAF breaks the tie; equal MAF gaps fall back to table distance
            # so an exact-knowledge zero-distance match can never lose
            maf_gap = np.abs(maf_meta[candidates] - knowledge.ref_maf[b])
            order = np.lexsort((dists[near], maf_gap))
            best = order[0]
            still_tied = (maf_gap == maf_gap[best]) & (dists[near] == dists[near][best])
            if still_tied.sum() > 1:
                # last resort: compare against every assigned column, not
                # just the anchor, so twin columns that agree with the
                # anchor can still be told apart
                a_cols = np.array([c for c, _ in assigned_pairs])
                a_idx = np.array([i for _, i in assigned_pairs])
                tied_cols = candidates[still_tied]
                total = np.abs(
                    meta_tables[np.ix_(a_cols, tied_cols)]
                    - knowledge.ref_tables[a_idx, b][:, None]
                ).sum(axis=(0, 2, 3))
                chosen = int(tied_cols[np.argmin(total)])
            else:
                chosen = int(candidates[best])
        else:
            chosen = int(candidates[0])
        assign(chosen, b)
        anchor_col, anchor_id = chosen, b
    return assignment


def true_column_ids(agreement: SyncAgreement) -> list[str]:
    """Ground truth: the SNP id actually stored in each metadata column."""
    perm = agreement.permutation()
    return [agreement.panel[src] for src in perm]


def unshuffling_accuracy(assignment: dict[int, str], truth: list[str]) -> float:
    correct = sum(1 for col, sid in assignment.items() if truth[col] == sid)
    return correct / len(truth)


def unshuffle_by_assignment(
    metadata: Metadata, assignment: dict[int, str], agreement: SyncAgreement
) -> np.ndarray:
    """Reorder metadata columns into the adversary's believed panel order.

    Columns whose assigned id falls outside the true panel (possible when
    I' is larger than the panel) are appended to otherwise-unfilled
    positions in deterministic order.
    """
    matrix = np.asarray(metadata.matrix)
    m = matrix.shape[1]
    panel_pos = {sid: j for j, sid in enumerate(agreement.panel)}
    out = np.zeros_like(matrix)
    placed = np.zeros(m, dtype=bool)
    leftovers = []
    for col in range(m):
        sid = assignment[col]
        if sid in panel_pos and not placed[panel_pos[sid]]:
            out[:, panel_pos[sid]] = matrix[:, col]
            placed[panel_pos[sid]] = True
        else:
            leftovers.append(col)
    holes = np.flatnonzero(~placed)
    for hole, col in zip(holes, leftovers):
        out[:, hole] = matrix[:, col]
    return out


def simulate_unshuffle_level(
    metadata: Metadata,
    agreement: SyncAgreement,
    level: float,
    seed: int,
) -> np.ndarray:
    """An un-shuffling result of prescribed quality, independent of attack.

    Exactly round(level * m) columns land at their true panel positions;
    the rest are deranged among themselves (none at its true position).
    A remainder of exactly one column cannot be deranged, so one extra
    column is left wrong in that case.
    """
    matrix = np.asarray(metadata.matrix)
    perm = agreement.permutation()
    m = len(perm)
    aligned = np.empty_like(matrix)
    aligned[:, perm] = matrix  # undo the column shuffle completely

    k = int(round(level * m))
    if m - k == 1:
        k -= 1
    if k >= m:
        return aligned
    rng = np.random.default_rng(seed)
    wrong = rng.choice(m, size=m - k, replace=False)
    cycle = rng.permutation(wrong)
    # Sattolo: one full cycle over the wrong set is always a derangement
    sigma = np.arange(m)
    sigma[cycle] = np.roll(cycle, 1)
    return aligned[:, sigma]


# -- membership inference ---------------------------------------------------

@dataclass(frozen=True)
class PowerConfig:
    set_a_size: int = 50
    set_b_size: int = 50
    fpr_target: float = 0.05

    def __post_init__(self):
        if self.set_a_size < 20 or self.set_b_size < 20:
            raise DegenerateSets("victim sets need at least 20 members")
        if not 0 < self.fpr_target < 1:
            raise DegenerateSets("fpr_target must be in (0, 1)")


@dataclass(frozen=True)
class PowerResult:
    gamma: float
    power: float
    achieved_fpr: float


def _min_hamming(victims: np.ndarray, dataset: np.ndarray) -> np.ndarray:
    """Minimum hamming distance of each victim row to any dataset row."""
    scores = np.empty(len(victims), dtype=np.int64)
    for i, v in enumerate(victims):
        scores[i] = (dataset != v).sum(axis=1).min()
    return scores


def membership_power_hamming(
    unshuffled: np.ndarray,
    victims_in: np.ndarray,
    victims_out: np.ndarray,
    config: PowerConfig = PowerConfig(),
) -> PowerResult:
    """Power of the min-hamming membership test at the calibrated threshold.

    The threshold gamma is the largest integer keeping the fraction of
    non-member (set A) scores strictly below it at or under the FPR target;
    power is the fraction of member (set B) scores below gamma.
    """
    if len(victims_out) < config.set_a_size or len(victims_in) < config.set_b_size:
        raise DegenerateSets(
            f"need |A| >= {config.set_a_size} and |B| >= {config.set_b_size}"
        )
    a_scores = _min_hamming(np.asarray(victims_out), unshuffled)
    b_scores = _min_hamming(np.asarray(victims_in), unshuffled)
    a_sorted = np.sort(a_scores)
    budget = int(np.floor(config.fpr_target * len(a_scores)))
    gamma = int(a_sorted[budget])
    return PowerResult(
        gamma=gamma,
        power=float((b_scores < gamma).mean()),
        achieved_fpr=float((a_scores < gamma).mean()),
    )


# -- LRT baseline -----------------------------------------------------------

_FREQ_FLOOR = 1e-6


def lrt_score(
    victim: np.ndarray,
    dataset_maf: np.ndarray,
    pop_maf: np.ndarray,
    encoding: str = "carrier",
) -> float:
    """Log-likelihood ratio of membership from released aggregate MAFs.

    With the default carrier encoding, x_j = 1 iff the victim carries at
    least one minor allele at SNP j. The allele-dosage alternative uses
    x_j / 2 per allele with weight 2.
    """
    victim = np.asarray(victim)
    a = np.clip(np.asarray(dataset_maf, dtype=np.float64),
                _FREQ_FLOOR, 1 - _FREQ_FLOOR)
    pop = np.clip(np.asarray(pop_maf, dtype=np.float64),
                  _FREQ_FLOOR, 1 - _FREQ_FLOOR)
    if not (victim.shape == a.shape == pop.shape):
        raise LengthMismatch(
            f"victim {victim.shape}, dataset maf {a.shape}, pop maf {pop.shape}"
        )
    if encoding == "carrier":
        x = (victim >= 1).astype(np.float64)
        weight = 1.0
    elif encoding == "dosage":
        x = victim / 2.0
        weight = 2.0
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    terms = x * np.log(a / pop) + (1 - x) * np.log((1 - a) / (1 - pop))
    return float(weight * terms.sum())


def lrt_scores(members, dataset_maf, pop_maf, encoding="carrier") -> np.ndarray:
    return np.array([lrt_score(v, dataset_maf, pop_maf, encoding) for v in members])


def lrt_power(
    members: np.ndarray,
    nonmembers: np.ndarray,
    dataset_maf: np.ndarray,
    pop_maf: np.ndarray,
    fpr_target: float = 0.05,
    encoding: str = "carrier",
) -> PowerResult:
    """Power of the LRT at the (1 - fpr) quantile of non-member scores."""
    if len(members) < 20 or len(nonmembers) < 20:
        raise DegenerateSets("victim sets need at least 20 members")
    non_scores = lrt_scores(nonmembers, dataset_maf, pop_maf, encoding)
    mem_scores = lrt_scores(members, dataset_maf, pop_maf, encoding)
    threshold = float(np.quantile(non_scores, 1 - fpr_target, method="higher"))
    return PowerResult(
        gamma=threshold,
        power=float((mem_scores > threshold).mean()),
        achieved_fpr=float((non_scores > threshold).mean()),
    )
