"""Simulator of a privacy-preserving federated kinship-discovery protocol.

Researchers project their genotype datasets onto an agreed SNP panel,
append synthetic rows, shuffle columns with a shared seeded permutation,
and add kinship-preserving local-differential-privacy noise before
handing the result to an untrusted matching server. The package also
implements the server-side KING kinship estimation and the adversarial
analyses (column un-shuffling, hamming-distance membership inference, and
the aggregate-statistics likelihood-ratio baseline) used to evaluate the
protocol's privacy.
"""

from .adversary import (
    AdversaryKnowledge,
    PowerConfig,
    PowerResult,
    lrt_power,
    lrt_score,
    membership_power_hamming,
    simulate_unshuffle_level,
    true_column_ids,
    unshuffle_greedy,
    unshuffling_accuracy,
)
from .dataset import (
    GenotypeDataset,
    compute_joint_table,
    compute_maf,
    hamming_distance,
    parse_dataset,
    table_distance,
    write_dataset,
)
from .errors import ConfigError, DataError, KinguardError
from .kinship import (
    KinshipDegree,
    KinshipReport,
    classify_degree,
    king_coefficient,
    king_counts,
    kinship_metrics,
    pairwise_kinship,
)
from .pedigree import (
    PedigreeTruth,
    build_study_population,
    generate_population,
    generate_relative,
    mendelian_child,
)
from .protocol import (
    LdpParams,
    Metadata,
    SyncAgreement,
    apply_ldp_variant,
    derive_permutation,
    filter_results,
    generate_synthetic_samples,
    prepare_metadata,
    select_snp_panel,
)

__version__ = "0.1.0"

__all__ = [
    "AdversaryKnowledge", "ConfigError", "DataError", "GenotypeDataset",
    "KinguardError", "KinshipDegree", "KinshipReport", "LdpParams",
    "Metadata", "PedigreeTruth", "PowerConfig", "PowerResult",
    "SyncAgreement", "apply_ldp_variant", "build_study_population",
    "classify_degree", "compute_joint_table", "compute_maf",
    "derive_permutation", "filter_results", "generate_population",
    "generate_relative", "generate_synthetic_samples", "hamming_distance",
    "king_coefficient", "king_counts", "kinship_metrics", "lrt_power",
    "lrt_score", "membership_power_hamming", "mendelian_child",
    "pairwise_kinship", "parse_dataset", "prepare_metadata",
    "select_snp_panel", "simulate_unshuffle_level", "table_distance",
    "true_column_ids", "unshuffle_greedy", "unshuffling_accuracy",
    "write_dataset",
]
