"""End-to-end experiment harness: configuration, sweeps, and record output.

Three canned experiments cover the pipeline: kinship recovery quality
across panel sizes and privacy budgets, un-shuffling attack accuracy
against the synthetic-sample and panel-selection defenses, and membership
inference power as a function of un-shuffling quality, with the
aggregate-statistics likelihood-ratio test as the risk baseline.

Every trial derives all of its seeds from (base_seed, trial index), so any
record can be regenerated bit-for-bit from its config echo. Trials run on
a thread pool and records are order-normalized before writing.
"""

from __future__ import annotations

import csv
import json
import math
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adversary import (
    AdversaryKnowledge,
    PowerConfig,
    lrt_power,
    membership_power_hamming,
    simulate_unshuffle_level,
    true_column_ids,
    unshuffle_greedy,
    unshuffling_accuracy,
)
from .dataset import compute_maf
from .errors import ConfigError
from .kinship import kinship_metrics, pairwise_kinship
from .pedigree import build_study_population, generate_population, sample_genotypes
from .protocol import LdpParams, SyncAgreement, prepare_metadata, select_snp_panel

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

# Fixed per-trial seed offsets; changing these changes every published number.
_SEED_FREQS = 50_000
_SEED_POPULATION = 100
_SEED_PANEL = 300
_SEED_AGREEMENT = 400
_SEED_METADATA = 500
_SEED_ATTACK = 600
_SEED_KIN_POP = 1000
_SEED_KIN_PANEL = 2000
_SEED_KIN_AGREE = 3000
_SEED_KIN_META_A = 4000
_SEED_KIN_META_B = 5000
_SEED_MEM_FREQS = 7
_SEED_MEM_TRIAL = 37
_SEED_MEM_POP = 2000
_SEED_MEM_AGREE = 3000
_SEED_MEM_META = 4000
_SEED_MEM_LEVEL = 5000
_SEED_LRT_TRIAL = 100
_SEED_LRT_POP = 200


@dataclass(frozen=True)
class PopulationConfig:
    n: int = 100                 # unrelated founders
    snp_count: int = 1000
    maf_low: float = 0.05
    maf_high: float = 0.5
    first: int = 20              # planted first-degree relatives
    second: int = 10             # planted second-degree relatives


@dataclass(frozen=True)
class ProtocolConfig:
    m: int = 250
    panel_strategy: str = "random"
    epsilon: float = 5.0
    n_prime: int = 0
    seed_u: int = 42


@dataclass(frozen=True)
class AdversaryConfig:
    i_prime_size: int = 0        # 0 means "equal to the panel size m"
    delta_corr: float = 0.01
    set_a: int = 50              # known non-members used to calibrate gamma
    set_b: int = 50              # victims whose membership is tested
    fpr: float = 0.05
    lrt_snp_count: int = 10_000  # aggregate-release size for the LRT baseline


@dataclass(frozen=True)
class SweepConfig:
    m_values: tuple[int, ...] = (50, 250, 500, 1000, 2500)
    epsilons: tuple[float, ...] = (3.0, 4.0, 5.0, math.inf)
    n_prime_values: tuple[int, ...] = (0, 100, 200, 300, 400, 500)
    strategies: tuple[str, ...] = ("random", "close-maf")
    i_prime_scales: tuple[str, ...] = ("m", "all")
    levels: tuple[float, ...] = (0.0, 0.2, 0.4, 0.7, 1.0)


@dataclass(frozen=True)
class RunConfig:
    trials: int = 10
    base_seed: int = 0
    workers: int = 4


@dataclass(frozen=True)
class ExperimentConfig:
    population: PopulationConfig = field(default_factory=PopulationConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        p, pr, a, r = self.population, self.protocol, self.adversary, self.run
        if pr.m > p.snp_count:
            raise ConfigError(f"panel m={pr.m} exceeds snp_count={p.snp_count}")
        if a.i_prime_size and a.i_prime_size < pr.m:
            raise ConfigError("adversary candidate set must cover the panel")
        if r.trials < 1:
            raise ConfigError("trials must be >= 1")
        if p.first + p.second > p.n:
            raise ConfigError("more relatives than founders")
        if not (0 < a.fpr < 1):
            raise ConfigError("fpr must lie in (0, 1)")
        for field_name, value in (("n", p.n), ("snp_count", p.snp_count),
                                  ("m", pr.m), ("n_prime", pr.n_prime)):
            if value < 0:
                raise ConfigError(f"{field_name} must be non-negative")


def _parse_epsilon(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return math.inf
        try:
            value = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad epsilon {value!r}") from exc
    eps = float(value)
    if not eps > 0:
        raise ConfigError(f"epsilon must be positive, got {eps}")
    return eps


_SECTIONS = {
    "population": PopulationConfig,
    "protocol": ProtocolConfig,
    "adversary": AdversaryConfig,
    "sweep": SweepConfig,
    "run": RunConfig,
}
_TUPLE_FIELDS = {"m_values", "epsilons", "n_prime_values",
                 "strategies", "i_prime_scales", "levels"}


def load_config(
    path: str | None,
    overrides: dict | None = None,
    base: ExperimentConfig | None = None,
) -> ExperimentConfig:
    """Build a config from an optional TOML file plus flat overrides.

    Starts from `base` (or all-default) and replaces only the keys present
    in the file/overrides. Override keys are dotted (`run.base_seed`);
    epsilon values accept the string "inf". Unknown sections or fields are
    config errors, not typos to ignore.
    """
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file is not valid TOML: {exc}") from exc
    for dotted, value in (overrides or {}).items():
        section, _, name = dotted.partition(".")
        raw.setdefault(section, {})[name] = value

    config = base if base is not None else ExperimentConfig()
    kwargs = {}
    for section, values in raw.items():
        cls = _SECTIONS.get(section)
        if cls is None:
            raise ConfigError(f"unknown config section [{section}]")
        fields = {f for f in cls.__dataclass_fields__}
        clean = {}
        for name, value in values.items():
            if name not in fields:
                raise ConfigError(f"unknown config key {section}.{name}")
            if name == "epsilon":
                value = _parse_epsilon(value)
            elif name == "epsilons":
                value = tuple(_parse_epsilon(v) for v in value)
            elif name in _TUPLE_FIELDS:
                value = tuple(value)
            clean[name] = value
        try:
            kwargs[section] = replace(getattr(config, section), **clean)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    return replace(config, **kwargs)


def default_kinship_config() -> ExperimentConfig:
    """Tuned defaults for the kinship sweep: 130-sample study populations."""
    return ExperimentConfig(
        population=PopulationConfig(n=100, snp_count=5000, first=20, second=10),
        protocol=ProtocolConfig(m=500, n_prime=0),
        run=RunConfig(trials=8),
    )


def default_unshuffle_config() -> ExperimentConfig:
    """Tuned defaults for the attack sweep: n=500 rows, 250-column panels."""
    return ExperimentConfig(
        population=PopulationConfig(n=500, snp_count=400, first=0, second=0),
        protocol=ProtocolConfig(m=250),
        sweep=SweepConfig(epsilons=(math.inf, 5.0, 4.0, 3.0)),
        run=RunConfig(trials=10),
    )


def default_membership_config() -> ExperimentConfig:
    """Tuned defaults for the power sweep: narrow-band 200-SNP panels."""
    return ExperimentConfig(
        population=PopulationConfig(n=500, snp_count=200, maf_low=0.06,
                                    maf_high=0.12, first=0, second=0),
        protocol=ProtocolConfig(m=200, n_prime=0),
        run=RunConfig(trials=10),
    )


# -- records ----------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    """One measured value, reproducible from (experiment, params, seed)."""

    experiment: str
    metric: str
    value: float
    params: dict
    trial: int
    seed: int
    wall_time: float

    def to_json(self) -> str:
        obj = {
            "experiment": self.experiment,
            "metric": self.metric,
            "value": None if math.isnan(self.value) else self.value,
            "params": {k: ("inf" if v == math.inf else v)
                       for k, v in sorted(self.params.items())},
            "trial": self.trial,
            "seed": self.seed,
            "wall_time": round(self.wall_time, 6),
        }
        return json.dumps(obj, sort_keys=True)


def _sort_key(rec: RunRecord):
    return (rec.experiment, rec.metric,
            json.dumps(rec.params, sort_keys=True, default=str), rec.trial)


def write_records(records, path) -> None:
    records = sorted(records, key=_sort_key)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def rows_to_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ConfigError("no rows to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("inf" if v == math.inf else v)
                             for k, v in row.items()})


def _map_trials(fn, trials: int, workers: int) -> list:
    if workers <= 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def _fmt_eps(eps: float) -> str:
    return "inf" if math.isinf(eps) else f"{eps:g}"


# -- kinship experiment -----------------------------------------------------


def kinship_trial(cfg: ExperimentConfig, m: int, epsilon: float, trial: int) -> dict:
    """One kinship run: two researchers, planted relatives, LDP, scoring."""
    base = cfg.run.base_seed
    pop_cfg = cfg.population
    rng = np.random.default_rng(base + trial)
    freqs = rng.uniform(pop_cfg.maf_low, pop_cfg.maf_high, 2 * m)
    pop = build_study_population(
        pop_cfg.n, pop_cfg.first, pop_cfg.second, freqs,
        seed=base + _SEED_KIN_POP + trial,
    )
    maf = compute_maf(pop.researcher_a)
    panel = select_snp_panel(
        maf, pop.researcher_a.snp_ids, m, cfg.protocol.panel_strategy,
        seed=base + _SEED_KIN_PANEL + trial,
    )
    agreement = SyncAgreement(panel, seed_u=base + _SEED_KIN_AGREE + trial)
    params = LdpParams(epsilon)
    md_a, loc_a = prepare_metadata(
        pop.researcher_a, agreement, cfg.protocol.n_prime, params,
        base + _SEED_KIN_META_A + trial, "a",
    )
    md_b, loc_b = prepare_metadata(
        pop.researcher_b, agreement, cfg.protocol.n_prime, params,
        base + _SEED_KIN_META_B + trial, "b",
    )
    report = pairwise_kinship([md_a, md_b])
    metrics = kinship_metrics(
        report, pop.truth,
        {**loc_a.pseudonym_to_sample, **loc_b.pseudonym_to_sample},
    )
    return {"accuracy": metrics.accuracy, "precision": metrics.precision,
            "recall": metrics.recall}


def run_exp_kinship(cfg: ExperimentConfig) -> tuple[list[dict], list[RunRecord]]:
    """Sweep (m, epsilon); rows are trial means, records are per-trial."""
    records: list[RunRecord] = []
    rows: list[dict] = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for m in cfg.sweep.m_values:
            for eps in cfg.sweep.epsilons:
                def one(trial, m=m, eps=eps):
                    t0 = time.perf_counter()
                    metrics = kinship_trial(cfg, m, eps, trial)
                    return metrics, time.perf_counter() - t0
                results = _map_trials(one, cfg.run.trials, cfg.run.workers)
                params = {"m": m, "epsilon": eps}
                for trial, (metrics, dt) in enumerate(results):
                    for name, value in metrics.items():
                        records.append(RunRecord(
                            "kinship", name, value, params, trial,
                            cfg.run.base_seed + trial, dt,
                        ))
                rows.append({
                    "m": m, "epsilon": _fmt_eps(eps),
                    **{name: round(float(np.mean([r[0][name] for r in results])), 6)
                       for name in ("accuracy", "precision", "recall")},
                })
    return rows, records


# -- un-shuffling experiment ------------------------------------------------


def unshuffle_trial(
    cfg: ExperimentConfig,
    strategy: str,
    n_prime: int,
    epsilon: float,
    i_prime_scale: str,
    trial: int,
) -> float:
    """One attack run; returns the fraction of columns recovered exactly."""
    base = cfg.run.base_seed
    pop_cfg, prot = cfg.population, cfg.protocol
    rng = np.random.default_rng(base + _SEED_FREQS + trial)
    freqs = rng.uniform(pop_cfg.maf_low, pop_cfg.maf_high, pop_cfg.snp_count)
    dataset = generate_population(pop_cfg.n, freqs,
                                  seed=base + _SEED_POPULATION + trial)
    maf = compute_maf(dataset)
    panel = select_snp_panel(maf, dataset.snp_ids, prot.m, strategy,
                             seed=base + _SEED_PANEL + trial)
    agreement = SyncAgreement(panel, seed_u=base + _SEED_AGREEMENT + trial)
    metadata, _ = prepare_metadata(
        dataset, agreement, n_prime, LdpParams(epsilon),
        base + _SEED_METADATA + trial,
    )
    if i_prime_scale == "m":
        candidates = panel
    elif i_prime_scale == "all":
        candidates = dataset.snp_ids
    else:
        raise ConfigError(f"unknown i_prime scale {i_prime_scale!r}")
    knowledge = AdversaryKnowledge.from_reference(dataset, candidates)
    assignment = unshuffle_greedy(metadata, knowledge,
                                  seed=base + _SEED_ATTACK + trial,
                                  delta_corr=cfg.adversary.delta_corr)
    return unshuffling_accuracy(assignment, true_column_ids(agreement))


def run_exp_unshuffle(cfg: ExperimentConfig) -> tuple[list[dict], list[RunRecord]]:
    """Sweep (strategy, n', epsilon, candidate-set scale) against the attack."""
    records: list[RunRecord] = []
    rows: list[dict] = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for strategy in cfg.sweep.strategies:
            for scale in cfg.sweep.i_prime_scales:
                for eps in cfg.sweep.epsilons:
                    for n_prime in cfg.sweep.n_prime_values:
                        def one(trial, s=strategy, n=n_prime, e=eps, sc=scale):
                            t0 = time.perf_counter()
                            acc = unshuffle_trial(cfg, s, n, e, sc, trial)
                            return acc, time.perf_counter() - t0
                        results = _map_trials(one, cfg.run.trials, cfg.run.workers)
                        params = {"strategy": strategy, "n_prime": n_prime,
                                  "epsilon": eps, "i_prime": scale}
                        for trial, (acc, dt) in enumerate(results):
                            records.append(RunRecord(
                                "unshuffle", "accuracy", acc, params, trial,
                                cfg.run.base_seed + trial, dt,
                            ))
                        rows.append({
                            "strategy": strategy, "i_prime": scale,
                            "epsilon": _fmt_eps(eps), "n_prime": n_prime,
                            "accuracy": round(float(np.mean([r[0] for r in results])), 6),
                        })
    return rows, records


# -- membership experiment --------------------------------------------------


def membership_trial(
    cfg: ExperimentConfig,
    epsilon: float,
    level: float,
    trial: int,
    freqs: np.ndarray,
) -> tuple[float, float]:
    """Hamming-test power at one (epsilon, un-shuffling level) cell."""
    base = cfg.run.base_seed
    n = cfg.population.n
    rng = np.random.default_rng(9000 * trial + _SEED_MEM_TRIAL + base)
    dataset = generate_population(n, freqs, seed=_SEED_MEM_POP + trial + base)
    agreement = SyncAgreement(tuple(dataset.snp_ids),
                              seed_u=_SEED_MEM_AGREE + trial + base)
    metadata, _ = prepare_metadata(
        dataset, agreement, cfg.protocol.n_prime, LdpParams(epsilon),
        _SEED_MEM_META + trial + base,
    )
    aligned = simulate_unshuffle_level(metadata, agreement, level,
                                       _SEED_MEM_LEVEL + trial + base)
    adv = cfg.adversary
    members = dataset.matrix[rng.choice(n, adv.set_b, replace=False)]
    nonmembers = sample_genotypes(adv.set_a, freqs, rng)
    result = membership_power_hamming(
        aligned, members, nonmembers,
        PowerConfig(adv.set_a, adv.set_b, adv.fpr),
    )
    return result.power, result.achieved_fpr


def lrt_baseline_trial(cfg: ExperimentConfig, trial: int) -> tuple[float, float]:
    """LRT power against released aggregate MAFs, plus its null calibration."""
    base = cfg.run.base_seed
    adv = cfg.adversary
    n = cfg.population.n
    rng = np.random.default_rng(_SEED_LRT_TRIAL + trial + base)
    freqs = rng.uniform(0.05, 0.5, adv.lrt_snp_count)
    dataset = generate_population(n, freqs, seed=_SEED_LRT_POP + trial + base)
    released_maf = compute_maf(dataset)
    members = dataset.matrix[rng.choice(n, adv.set_b, replace=False)]
    nonmembers = sample_genotypes(adv.set_a, freqs, rng)
    power = lrt_power(members, nonmembers, released_maf, freqs, adv.fpr).power
    null_members = sample_genotypes(adv.set_b, freqs, rng)
    null = lrt_power(null_members, nonmembers, released_maf, freqs, adv.fpr).power
    return power, null


def run_exp_membership(cfg: ExperimentConfig) -> tuple[list[dict], list[RunRecord]]:
    """Sweep (epsilon, level) for the hamming test; add the LRT baseline."""
    records: list[RunRecord] = []
    rows: list[dict] = []
    # Panel frequencies are drawn once per trial from a shared stream, so
    # every (epsilon, level) cell sees the same populations.
    freq_rng = np.random.default_rng(_SEED_MEM_FREQS + cfg.run.base_seed)
    freq_list = [
        freq_rng.uniform(cfg.population.maf_low, cfg.population.maf_high,
                         cfg.protocol.m)
        for _ in range(cfg.run.trials)
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        baseline = _map_trials(
            lambda t: lrt_baseline_trial(cfg, t), cfg.run.trials, cfg.run.workers
        )
        lrt_mean = float(np.mean([b[0] for b in baseline]))
        null_mean = float(np.mean([b[1] for b in baseline]))
        for trial, (power, null) in enumerate(baseline):
            for name, value in (("lrt_power", power), ("lrt_null_power", null)):
                records.append(RunRecord("membership", name, value, {},
                                         trial, cfg.run.base_seed + trial, 0.0))
        for eps in cfg.sweep.epsilons:
            for level in cfg.sweep.levels:
                def one(trial, e=eps, lv=level):
                    t0 = time.perf_counter()
                    power, fpr = membership_trial(cfg, e, lv, trial,
                                                  freq_list[trial])
                    return power, fpr, time.perf_counter() - t0
                results = _map_trials(one, cfg.run.trials, cfg.run.workers)
                params = {"epsilon": eps, "level": level}
                for trial, (power, fpr, dt) in enumerate(results):
                    records.append(RunRecord("membership", "power", power,
                                             params, trial,
                                             cfg.run.base_seed + trial, dt))
                    records.append(RunRecord("membership", "achieved_fpr", fpr,
                                             params, trial,
                                             cfg.run.base_seed + trial, dt))
                rows.append({
                    "epsilon": _fmt_eps(eps), "level": level,
                    "power": round(float(np.mean([r[0] for r in results])), 6),
                    "max_achieved_fpr": round(float(np.max([r[1] for r in results])), 6),
                    "lrt_power": round(lrt_mean, 6),
                    "lrt_null_power": round(null_mean, 6),
                })
    return rows, records
