"""Command-line interface for the kinship-discovery simulator.

Verbs mirror the pipeline stages: `generate` builds populations,
`prepare-metadata` runs the researcher-side protocol, `compute-kinship`
plays the server, `attack ...` plays the adversary, and `exp ...` runs the
canned experiment sweeps, writing CSV + NDJSON records and a rendered
figure per sweep.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import math
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import experiments, plots
from .adversary import (
    AdversaryKnowledge,
    PowerConfig,
    membership_power_hamming,
    true_column_ids,
    unshuffle_greedy,
    unshuffling_accuracy,
)
from .dataset import GenotypeDataset, compute_maf, parse_dataset, write_dataset
from .errors import ConfigError, DataError
from .kinship import pairwise_kinship
from .pedigree import build_study_population
from .protocol import (
    LdpParams,
    Metadata,
    SyncAgreement,
    prepare_metadata,
    select_snp_panel,
)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _out_dir(out: str | None, default: str) -> Path:
    path = Path(out) if out else Path(default)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _epsilon_option(value: str) -> float:
    return experiments._parse_epsilon(value)


@click.group()
def cli():
    """Privacy-preserving federated kinship discovery, simulated end to end."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config; [population] controls sizes and MAF range.")
@click.option("--seed", type=int, default=None, help="Overrides run.base_seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Output directory (default ./generated).")
def generate(config_path, seed, out):
    """Generate two researcher datasets with planted relatives plus truth."""
    overrides = {"run.base_seed": seed} if seed is not None else {}
    cfg = experiments.load_config(config_path, overrides,
                                  base=experiments.default_kinship_config())
    pop = cfg.population
    rng = np.random.default_rng(cfg.run.base_seed)
    freqs = rng.uniform(pop.maf_low, pop.maf_high, pop.snp_count)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        study = build_study_population(pop.n, pop.first, pop.second, freqs,
                                       seed=cfg.run.base_seed)
    out_dir = _out_dir(out, "generated")
    (out_dir / "researcher_a.tsv").write_text(write_dataset(study.researcher_a))
    (out_dir / "researcher_b.tsv").write_text(write_dataset(study.researcher_b))
    (out_dir / "truth.csv").write_text(study.truth.to_csv())
    click.echo(f"wrote {pop.n}+{pop.first + pop.second} samples, "
               f"{pop.snp_count} SNPs to {out_dir}")


@cli.command("prepare-metadata")
@click.option("--dataset", "dataset_path", type=click.Path(), required=True)
@click.option("--agreement", "agreement_path", type=click.Path(), default=None,
              help="Existing panel agreement; omitted means create one.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--epsilon", type=str, default=None,
              help='Privacy budget; "inf" disables the noise.')
@click.option("--n-prime", type=int, default=None, help="Synthetic rows to add.")
@click.option("--seed", type=int, default=None, help="Local researcher seed.")
@click.option("--prefix", default="p", show_default=True,
              help="Pseudonym prefix; give each researcher a distinct one.")
@click.option("--out", type=click.Path(), default=None)
def prepare_metadata_cmd(dataset_path, agreement_path, config_path,
                         epsilon, n_prime, seed, prefix, out):
    """Run the researcher pipeline: project, augment, shuffle, noise."""
    overrides = {}
    if seed is not None:
        overrides["run.base_seed"] = seed
    if epsilon is not None:
        overrides["protocol.epsilon"] = _epsilon_option(epsilon)
    if n_prime is not None:
        overrides["protocol.n_prime"] = n_prime
    cfg = experiments.load_config(config_path, overrides)
    dataset = parse_dataset(_read(dataset_path))
    if agreement_path is not None:
        agreement = SyncAgreement.from_json(_read(agreement_path))
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            maf = compute_maf(dataset)
        panel = select_snp_panel(maf, dataset.snp_ids, cfg.protocol.m,
                                 cfg.protocol.panel_strategy,
                                 seed=cfg.run.base_seed)
        agreement = SyncAgreement(panel, seed_u=cfg.protocol.seed_u)
    metadata, local = prepare_metadata(
        dataset, agreement, cfg.protocol.n_prime,
        LdpParams(cfg.protocol.epsilon), cfg.run.base_seed,
        pseudonym_prefix=prefix,
    )
    out_dir = _out_dir(out, "metadata")
    (out_dir / "metadata.txt").write_text(metadata.to_text())
    if agreement_path is None:
        (out_dir / "agreement.json").write_text(agreement.to_json())
    local_lines = ["pseudonym,sample_id"]
    local_lines += [f"{p},{s}" for p, s in sorted(local.pseudonym_to_sample.items())]
    local_lines += [f"{p}," for p in sorted(local.synthetic)]
    (out_dir / "local.csv").write_text("\n".join(local_lines) + "\n")
    click.echo(f"wrote metadata ({len(metadata.row_ids)} rows x {metadata.m} "
               f"columns) to {out_dir}")


@cli.command("compute-kinship")
@click.argument("metadata_paths", nargs=-1, required=True, type=click.Path())
@click.option("--scope", type=click.Choice(["cross-only", "all-pairs"]),
              default="cross-only", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def compute_kinship_cmd(metadata_paths, scope, out):
    """Server side: pairwise coefficients and degrees across metadata files."""
    if scope == "cross-only" and len(metadata_paths) < 2:
        raise ConfigError("cross-only scope needs at least two metadata files")
    metadatas = [Metadata.from_text(_read(p)) for p in metadata_paths]
    report = pairwise_kinship(metadatas, scope=scope)
    out_dir = _out_dir(out, "kinship")
    (out_dir / "kinship.csv").write_text(report.to_csv())
    related = sum(1 for e in report.entries if e.degree.label != "unrel")
    click.echo(f"{len(report.entries)} pairs scored, {related} flagged related; "
               f"report in {out_dir}")


@cli.group()
def attack():
    """Adversarial analyses run by a curious server."""


@attack.command("unshuffle")
@click.option("--metadata", "metadata_path", type=click.Path(), required=True)
@click.option("--reference", "reference_path", type=click.Path(), required=True,
              help="Public reference dataset covering the candidate SNPs.")
@click.option("--agreement", "agreement_path", type=click.Path(), default=None,
              help="If given, score the recovered assignment against truth.")
@click.option("--delta-corr", type=float, default=0.01, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def attack_unshuffle(metadata_path, reference_path, agreement_path,
                     delta_corr, seed, out):
    """Recover SNP identities of shuffled columns from reference statistics."""
    metadata = Metadata.from_text(_read(metadata_path))
    reference = parse_dataset(_read(reference_path))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        knowledge = AdversaryKnowledge.from_reference(reference, reference.snp_ids)
        assignment = unshuffle_greedy(metadata, knowledge, seed=seed,
                                      delta_corr=delta_corr)
    out_dir = _out_dir(out, "attack")
    lines = ["column,snp_id"]
    lines += [f"{col},{sid}" for col, sid in sorted(assignment.items())]
    (out_dir / "assignment.csv").write_text("\n".join(lines) + "\n")
    message = f"assigned {len(assignment)} columns; results in {out_dir}"
    if agreement_path is not None:
        agreement = SyncAgreement.from_json(_read(agreement_path))
        accuracy = unshuffling_accuracy(assignment, true_column_ids(agreement))
        message += f"; accuracy {accuracy:.3f}"
    click.echo(message)


@attack.command("membership")
@click.option("--metadata", "metadata_path", type=click.Path(), required=True)
@click.option("--agreement", "agreement_path", type=click.Path(), required=True,
              help="Used to align columns (the attacker's best case).")
@click.option("--victims", "victims_path", type=click.Path(), required=True,
              help="Dataset of targets whose membership is tested.")
@click.option("--nonmembers", "nonmembers_path", type=click.Path(), required=True,
              help="Known non-members used to calibrate the threshold.")
@click.option("--fpr", type=float, default=0.05, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def attack_membership(metadata_path, agreement_path, victims_path,
                      nonmembers_path, fpr, out):
    """Minimum-hamming membership test against the shared metadata."""
    metadata = Metadata.from_text(_read(metadata_path))
    agreement = SyncAgreement.from_json(_read(agreement_path))
    perm = agreement.permutation()
    aligned = np.empty_like(np.asarray(metadata.matrix))
    aligned[:, perm] = metadata.matrix

    def project(dataset: GenotypeDataset) -> np.ndarray:
        index = {sid: k for k, sid in enumerate(dataset.snp_ids)}
        missing = [sid for sid in agreement.panel if sid not in index]
        if missing:
            raise DataError(f"victim data lacks panel SNPs: {missing[:5]}")
        return dataset.matrix[:, [index[sid] for sid in agreement.panel]]

    victims = project(parse_dataset(_read(victims_path)))
    nonmembers = project(parse_dataset(_read(nonmembers_path)))
    result = membership_power_hamming(
        aligned, victims, nonmembers,
        PowerConfig(len(nonmembers), len(victims), fpr),
    )
    out_dir = _out_dir(out, "attack")
    (out_dir / "membership.csv").write_text(
        "gamma,power,achieved_fpr\n"
        f"{result.gamma},{result.power:.6f},{result.achieved_fpr:.6f}\n"
    )
    click.echo(f"gamma={result.gamma} power={result.power:.3f} "
               f"achieved_fpr={result.achieved_fpr:.3f}; results in {out_dir}")


@cli.group()
def exp():
    """Canned experiment sweeps with tuned defaults."""


def _run_experiment(name, config_path, seed, out, default_cfg, runner, plotter):
    overrides = {"run.base_seed": seed} if seed is not None else {}
    cfg = experiments.load_config(config_path, overrides, base=default_cfg)
    rows, records = runner(cfg)
    out_dir = _out_dir(out, f"exp-{name}")
    experiments.rows_to_csv(rows, out_dir / f"{name}.csv")
    experiments.write_records(records, out_dir / f"{name}.ndjson")
    plotter(rows, str(out_dir / f"{name}.png"))
    click.echo(f"{name}: {len(rows)} sweep cells, {len(records)} trial records "
               f"-> {out_dir}")
    return rows


_COMMON = [
    click.option("--config", "config_path", type=click.Path(), default=None),
    click.option("--seed", type=int, default=None, help="Overrides run.base_seed."),
    click.option("--out", type=click.Path(), default=None),
]


def _with_common(fn):
    for option in reversed(_COMMON):
        fn = option(fn)
    return fn


@exp.command("kinship")
@_with_common
def exp_kinship(config_path, seed, out):
    """Degree recovery quality across panel sizes and privacy budgets."""
    _run_experiment("kinship", config_path, seed, out,
                    experiments.default_kinship_config(),
                    experiments.run_exp_kinship, plots.plot_kinship)


@exp.command("unshuffle")
@_with_common
def exp_unshuffle(config_path, seed, out):
    """Un-shuffling attack accuracy against the protocol's defenses."""
    _run_experiment("unshuffle", config_path, seed, out,
                    experiments.default_unshuffle_config(),
                    experiments.run_exp_unshuffle, plots.plot_unshuffle)


@exp.command("membership")
@_with_common
def exp_membership(config_path, seed, out):
    """Membership inference power versus un-shuffling quality + LRT baseline."""
    _run_experiment("membership", config_path, seed, out,
                    experiments.default_membership_config(),
                    experiments.run_exp_membership, plots.plot_membership)


def main():
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(3)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
