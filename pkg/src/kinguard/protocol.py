"""Researcher-side protocol: panel agreement, seeded shuffling, synthetic
samples, the kinship-preserving LDP variant, and metadata assembly.

The permutation shared by all researchers is a Fisher-Yates shuffle driven
by a ChaCha20 keystream keyed with the common seed, so it is bit-exact
across parties and platforms. The LDP variant keeps each genotype with
probability p = e^eps / (e^eps + 2); a homozygote (0 or 2) otherwise moves
to 1, and a heterozygote moves to 0 or 2 with equal probability. A 0 never
becomes a 2 in one step, which is what preserves the KING counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from .dataset import GenotypeDataset, maf_of_matrix
from .errors import MissingPanelSnp, PanelTooLarge
from .pedigree import sample_genotypes

SYNTHETIC_MAF_LOW = 0.05
SYNTHETIC_MAF_HIGH = 0.5


# -- deterministic permutation ----------------------------------------------

def _chacha_u64_stream(seed: int):
    """Unbounded stream of uniform 64-bit integers keyed by the seed."""
    key = int(seed).to_bytes(32, "little")  # supports seeds up to 2**256 - 1
    nonce = b"\x00" * 16
    enc = Cipher(algorithms.ChaCha20(key, nonce), mode=None).encryptor()
    while True:
        block = enc.update(b"\x00" * 1024)
        for off in range(0, 1024, 8):
            yield int.from_bytes(block[off:off + 8], "little")


def derive_permutation(seed: int, m: int) -> list[int]:
    """Fisher-Yates shuffle of [0..m-1] from the seeded ChaCha20 stream.

    Draws are debiased by rejection sampling, so the result depends only on
    (seed, m), never on platform word size or library RNG internals.
    """
    draws = _chacha_u64_stream(seed)
    perm = list(range(m))
    for i in range(m - 1, 0, -1):
        bound = (1 << 64) - ((1 << 64) % (i + 1))
        v = next(draws)
        while v >= bound:
            v = next(draws)
        j = v % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def invert_permutation(perm: list[int]) -> list[int]:
    inv = [0] * len(perm)
    for pos, src in enumerate(perm):
        inv[src] = pos
    return inv


# -- agreement and panel selection ------------------------------------------

@dataclass(frozen=True)
class SyncAgreement:
    """The researchers' shared panel (ordered SNP ids) and common seed."""

    panel: tuple[str, ...]
    seed_u: int

    def __post_init__(self):
        if len(set(self.panel)) != len(self.panel):
            raise MissingPanelSnp("panel contains duplicate SNP ids")

    @property
    def m(self) -> int:
        return len(self.panel)

    def permutation(self) -> list[int]:
        return derive_permutation(self.seed_u, self.m)

    def to_json(self) -> str:
        return json.dumps({"panel": list(self.panel), "seed_u": str(self.seed_u)},
                          indent=0) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SyncAgreement":
        obj = json.loads(text)
        return cls(tuple(obj["panel"]), int(obj["seed_u"]))


def select_snp_panel(
    maf: np.ndarray,
    snp_ids,
    m: int,
    strategy: str = "random",
    seed: int = 0,
) -> tuple[str, ...]:
    """Choose the m-SNP panel to share.

    `random` samples uniformly without replacement. `close-maf` picks the
    m-length window of MAF-sorted SNPs minimizing the window's MAF spread,
    which starves the server's un-shuffling attack of its MAF signal.
    """
    snp_ids = list(snp_ids)
    if m > len(snp_ids):
        raise PanelTooLarge(f"panel of {m} from {len(snp_ids)} SNPs")
    maf = np.asarray(maf, dtype=np.float64)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(snp_ids), size=m, replace=False)
    elif strategy == "close-maf":
        order = np.argsort(maf, kind="stable")
        sorted_maf = maf[order]
        spreads = sorted_maf[m - 1:] - sorted_maf[: len(snp_ids) - m + 1]
        start = int(np.argmin(spreads))
        idx = order[start:start + m]
    else:
        raise ValueError(f"unknown panel strategy {strategy!r}")
    return tuple(snp_ids[i] for i in idx)


# -- LDP variant ------------------------------------------------------------

@dataclass(frozen=True)
class LdpParams:
    """Randomized-response parameters for the kinship-preserving variant."""

    epsilon: float  # > 0, math.inf means "no noise"
    alphabet_size: int = 3

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive (or math.inf)")

    @property
    def keep_prob(self) -> float:
        if math.isinf(self.epsilon):
            return 1.0
        e = math.exp(self.epsilon)
        return e / (e + self.alphabet_size - 1)

    @property
    def hom_flip_prob(self) -> float:
        """P(0 -> 1) and P(2 -> 1)."""
        return 1.0 - self.keep_prob

    @property
    def het_flip_prob(self) -> float:
        """P(1 -> 0) = P(1 -> 2)."""
        return (1.0 - self.keep_prob) / 2.0


def apply_ldp_variant(matrix: np.ndarray, params: LdpParams, seed: int) -> np.ndarray:
    """Per-cell randomized response that never crosses 0 <-> 2.

    Uses a Philox counter-based stream and draws the whole uniform field in
    one fixed (row, column) order, so the output is independent of any
    traversal or parallelization order.
    """
    matrix = np.asarray(matrix, dtype=np.int8)
    if math.isinf(params.epsilon):
        return matrix.copy()
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random(matrix.shape)
    side = rng.random(matrix.shape)
    out = matrix.copy()
    perturbed = u >= params.keep_prob
    hom = perturbed & (matrix != 1)
    out[hom] = 1
    het = perturbed & (matrix == 1)
    out[het] = np.where(side[het] < 0.5, 0, 2).astype(np.int8)
    return out


# -- synthetic samples ------------------------------------------------------

def generate_synthetic_samples(
    m: int, n_prime: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """SNP-independent Hardy-Weinberg rows with fresh per-SNP frequencies.

    Frequencies are redrawn uniformly from [0.05, 0.5] per SNP per batch,
    which distorts both the dataset-level MAFs and the inter-SNP joint
    tables the un-shuffling attack relies on. Returns (rows, frequencies).
    """
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(SYNTHETIC_MAF_LOW, SYNTHETIC_MAF_HIGH, size=m)
    if n_prime == 0:
        return np.zeros((0, m), dtype=np.int8), freqs
    return sample_genotypes(n_prime, freqs, rng), freqs


# -- metadata assembly ------------------------------------------------------

@dataclass(frozen=True)
class Metadata:
    """The shuffled, augmented, noised partial dataset shipped to the server.

    Column labels are opaque (`c0..c(m-1)`); row ids are per-researcher
    pseudonyms. No plaintext SNP id survives serialization.
    """

    row_ids: tuple[str, ...]
    matrix: np.ndarray  # (n + n', m) int8

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.int8)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        assert len(set(self.row_ids)) == len(self.row_ids)

    @property
    def m(self) -> int:
        return self.matrix.shape[1]

    def to_text(self) -> str:
        header = " ".join(f"c{k}" for k in range(self.m))
        lines = [header]
        for rid, row in zip(self.row_ids, self.matrix):
            lines.append(rid + " " + " ".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Metadata":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        row_ids = []
        rows = []
        for line in lines[1:]:
            tokens = line.split()
            row_ids.append(tokens[0])
            rows.append([int(t) for t in tokens[1:]])
        return cls(tuple(row_ids), np.array(rows, dtype=np.int8))


@dataclass(frozen=True)
class ResearcherLocal:
    """State a researcher keeps to itself after sharing metadata."""

    synthetic: frozenset[str]                # pseudonyms of synthetic rows
    pseudonym_to_sample: dict[str, str]      # real rows only

    @property
    def registry(self) -> frozenset[str]:
        return self.synthetic


def prepare_metadata(
    dataset: GenotypeDataset,
    agreement: SyncAgreement,
    n_prime: int,
    params: LdpParams,
    local_seed: int,
    pseudonym_prefix: str = "p",
) -> tuple[Metadata, ResearcherLocal]:
    """Full researcher pipeline from raw dataset to shareable metadata.

    Project onto the agreed panel, append synthetic rows, shuffle columns
    by the shared permutation, shuffle rows and pseudonymize them with the
    local seed, then apply the LDP variant.
    """
    missing = [sid for sid in agreement.panel if sid not in dataset.snp_ids]
    if missing:
        raise MissingPanelSnp(f"panel SNPs absent from dataset: {missing[:5]}")
    col_index = {sid: k for k, sid in enumerate(dataset.snp_ids)}
    panel_cols = [col_index[sid] for sid in agreement.panel]
    projected = dataset.matrix[:, panel_cols]

    rng = np.random.default_rng(local_seed)
    synth_rows, _ = generate_synthetic_samples(
        agreement.m, n_prime, int(rng.integers(2**63))
    )
    stacked = np.vstack([projected, synth_rows]).astype(np.int8)
    is_synthetic = np.zeros(len(stacked), dtype=bool)
    is_synthetic[len(projected):] = True

    perm = agreement.permutation()
    shuffled = stacked[:, perm]  # column k now holds panel SNP perm[k]

    row_order = rng.permutation(len(stacked))
    shuffled = shuffled[row_order]
    pseudonyms = tuple(f"{pseudonym_prefix}{k:05d}" for k in range(len(stacked)))

    noised = apply_ldp_variant(shuffled, params, int(rng.integers(2**63)))

    synthetic = frozenset(
        pseudonyms[k] for k, src in enumerate(row_order) if is_synthetic[src]
    )
    mapping = {
        pseudonyms[k]: dataset.sample_ids[src]
        for k, src in enumerate(row_order) if not is_synthetic[src]
    }
    return Metadata(pseudonyms, noised), ResearcherLocal(synthetic, mapping)


def filter_results(pairs, registry) -> list:
    """Drop any reported pair that touches a synthetic pseudonym."""
    registry = frozenset(registry)
    return [p for p in pairs if p[0] not in registry and p[1] not in registry]
