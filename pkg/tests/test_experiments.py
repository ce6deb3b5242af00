import json
import math
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from kinguard import cli as cli_mod
from kinguard.errors import ConfigError
from kinguard.experiments import (
    ExperimentConfig,
    PopulationConfig,
    ProtocolConfig,
    RunConfig,
    RunRecord,
    SweepConfig,
    default_kinship_config,
    default_membership_config,
    default_unshuffle_config,
    kinship_trial,
    load_config,
    membership_trial,
    rows_to_csv,
    run_exp_kinship,
    unshuffle_trial,
    write_records,
)


def test_config_defaults_valid():
    for cfg in (ExperimentConfig(), default_kinship_config(),
                default_unshuffle_config(), default_membership_config()):
        assert cfg.run.trials >= 1


def test_config_invariants():
    with pytest.raises(ConfigError):
        ExperimentConfig(population=PopulationConfig(snp_count=10),
                         protocol=ProtocolConfig(m=20))
    with pytest.raises(ConfigError):
        ExperimentConfig(run=RunConfig(trials=0))
    with pytest.raises(ConfigError):
        ExperimentConfig(population=PopulationConfig(n=5, first=4, second=3))


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(
        '[population]\nn = 42\n[protocol]\nepsilon = "inf"\n[run]\ntrials = 3\n'
    )
    cfg = load_config(str(path), {"run.base_seed": 9})
    assert cfg.population.n == 42
    assert cfg.protocol.epsilon == math.inf
    assert cfg.run.trials == 3
    assert cfg.run.base_seed == 9
    # untouched sections keep their defaults
    assert cfg.protocol.m == ExperimentConfig().protocol.m


def test_load_config_base_is_preserved(tmp_path):
    base = default_membership_config()
    cfg = load_config(None, {"run.trials": 2}, base=base)
    assert cfg.population.maf_high == base.population.maf_high
    assert cfg.run.trials == 2


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text("not [valid")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    unknown_section = tmp_path / "s.toml"
    unknown_section.write_text("[bogus]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(unknown_section))
    unknown_key = tmp_path / "k.toml"
    unknown_key.write_text("[run]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(unknown_key))
    bad_eps = tmp_path / "e.toml"
    bad_eps.write_text('[protocol]\nepsilon = "many"\n')
    with pytest.raises(ConfigError):
        load_config(str(bad_eps))


def test_run_record_json_roundtrip():
    rec = RunRecord("kinship", "recall", 0.5, {"epsilon": math.inf, "m": 10},
                    trial=2, seed=7, wall_time=0.125)
    obj = json.loads(rec.to_json())
    assert obj["params"] == {"epsilon": "inf", "m": 10}
    assert obj["value"] == 0.5
    nan_rec = RunRecord("kinship", "phi", math.nan, {}, 0, 0, 0.0)
    assert json.loads(nan_rec.to_json())["value"] is None


def test_write_records_sorted(tmp_path):
    records = [
        RunRecord("x", "acc", 0.1, {"k": 2}, 1, 1, 0.0),
        RunRecord("x", "acc", 0.2, {"k": 1}, 0, 0, 0.0),
    ]
    path = tmp_path / "r.ndjson"
    write_records(records, path)
    lines = [json.loads(ln) for ln in path.read_text().splitlines()]
    assert [ln["params"]["k"] for ln in lines] == [1, 2]


def test_rows_to_csv(tmp_path):
    path = tmp_path / "t.csv"
    rows_to_csv([{"a": 1, "b": math.inf}, {"a": 2, "b": 0.5}], path)
    assert path.read_text() == "a,b\n1,inf\n2,0.5\n"
    with pytest.raises(ConfigError):
        rows_to_csv([], path)


def test_trials_are_reproducible():
    cfg = default_unshuffle_config()
    assert unshuffle_trial(cfg, "random", 100, 5.0, "m", 0) == \
        unshuffle_trial(cfg, "random", 100, 5.0, "m", 0)
    kcfg = default_kinship_config()
    assert kinship_trial(kcfg, 100, 5.0, 1) == kinship_trial(kcfg, 100, 5.0, 1)
    mcfg = default_membership_config()
    freqs = np.full(mcfg.protocol.m, 0.1)
    assert membership_trial(mcfg, 5.0, 0.5, 0, freqs) == \
        membership_trial(mcfg, 5.0, 0.5, 0, freqs)


def test_run_exp_kinship_small():
    cfg = ExperimentConfig(
        population=PopulationConfig(n=30, snp_count=200, first=4, second=2),
        protocol=ProtocolConfig(m=100),
        sweep=SweepConfig(m_values=(100,), epsilons=(math.inf,)),
        run=RunConfig(trials=2),
    )
    rows, records = run_exp_kinship(cfg)
    assert len(rows) == 1
    assert rows[0]["m"] == 100 and rows[0]["epsilon"] == "inf"
    assert 0.0 <= rows[0]["recall"] <= 1.0
    assert len(records) == 2 * 3  # trials x metrics


# -- CLI --------------------------------------------------------------------


@pytest.fixture()
def runner():
    return CliRunner()


SMALL_TOML = """\
[population]
n = 30
snp_count = 120
first = 3
second = 2
[protocol]
m = 60
[run]
trials = 2
"""


def test_cli_generate_deterministic(runner, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL_TOML)
    for sub in ("g1", "g2"):
        result = runner.invoke(cli_mod.cli, [
            "generate", "--config", str(cfg), "--seed", "5",
            "--out", str(tmp_path / sub),
        ])
        assert result.exit_code == 0, result.output
    for name in ("researcher_a.tsv", "researcher_b.tsv", "truth.csv"):
        assert (tmp_path / "g1" / name).read_bytes() == \
            (tmp_path / "g2" / name).read_bytes()
    truth = (tmp_path / "g1" / "truth.csv").read_text()
    assert len(truth.splitlines()) == 6  # header + 5 planted pairs


def test_cli_generate_zero_relatives(runner, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[population]\nn = 10\nsnp_count = 50\nfirst = 0\nsecond = 0\n"
                   "[protocol]\nm = 25\n")
    result = runner.invoke(cli_mod.cli, [
        "generate", "--config", str(cfg), "--out", str(tmp_path / "g"),
    ])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "g" / "truth.csv").read_text() == "id1,id2,degree\n"


def test_cli_pipeline_end_to_end(runner, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL_TOML)
    assert runner.invoke(cli_mod.cli, [
        "generate", "--config", str(cfg), "--seed", "1",
        "--out", str(tmp_path / "gen"),
    ]).exit_code == 0
    assert runner.invoke(cli_mod.cli, [
        "prepare-metadata", "--dataset", str(tmp_path / "gen" / "researcher_a.tsv"),
        "--config", str(cfg), "--epsilon", "inf", "--n-prime", "4",
        "--seed", "11", "--prefix", "a", "--out", str(tmp_path / "mdA"),
    ]).exit_code == 0
    assert runner.invoke(cli_mod.cli, [
        "prepare-metadata", "--dataset", str(tmp_path / "gen" / "researcher_b.tsv"),
        "--agreement", str(tmp_path / "mdA" / "agreement.json"),
        "--epsilon", "inf", "--seed", "12", "--prefix", "b",
        "--out", str(tmp_path / "mdB"),
    ]).exit_code == 0
    result = runner.invoke(cli_mod.cli, [
        "compute-kinship", str(tmp_path / "mdA" / "metadata.txt"),
        str(tmp_path / "mdB" / "metadata.txt"), "--out", str(tmp_path / "kin"),
    ])
    assert result.exit_code == 0, result.output
    report = (tmp_path / "kin" / "kinship.csv").read_text().splitlines()
    assert report[0] == "id_a,id_b,phi,degree"
    assert len(report) == 1 + (30 + 4) * 5  # all cross pairs
    assert runner.invoke(cli_mod.cli, [
        "attack", "unshuffle",
        "--metadata", str(tmp_path / "mdA" / "metadata.txt"),
        "--reference", str(tmp_path / "gen" / "researcher_a.tsv"),
        "--agreement", str(tmp_path / "mdA" / "agreement.json"),
        "--out", str(tmp_path / "att"),
    ]).exit_code == 0
    assignment = (tmp_path / "att" / "assignment.csv").read_text().splitlines()
    assert assignment[0] == "column,snp_id"
    assert len(assignment) == 61


def test_cli_exp_kinship_writes_artifacts(runner, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL_TOML + "[sweep]\nm_values = [60]\nepsilons = [5]\n")
    result = runner.invoke(cli_mod.cli, [
        "exp", "kinship", "--config", str(cfg), "--out", str(tmp_path / "e"),
    ])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "e" / "kinship.csv").exists()
    assert (tmp_path / "e" / "kinship.ndjson").exists()
    assert (tmp_path / "e" / "kinship.png").stat().st_size > 0


def test_cli_exit_codes(tmp_path):
    env_cmd = [sys.executable, "-m", "kinguard.cli"]

    def run(*args):
        return subprocess.run(env_cmd + list(args), capture_output=True,
                              text=True, cwd=tmp_path)

    missing_cfg = run("generate", "--config", "nope.toml")
    assert missing_cfg.returncode == 2
    missing_data = run("compute-kinship", "a.txt", "b.txt")
    assert missing_data.returncode == 3
    bad = tmp_path / "bad.toml"
    bad.write_text("[protocol]\nm = 100000\n")
    bad_cfg = run("generate", "--config", str(bad))
    assert bad_cfg.returncode == 2
