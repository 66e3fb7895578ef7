"""
Tests for the fedcom command-line interface.
"""

import json

import pytest

from fedcom.cli import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR, main, parse_fractions
from fedcom.errors import ConfigError

MINIMAL = """
rule: fedcom
rounds: 2
worker_count: 5
commitment_m: 3
source.per_class: 40
source.dim: 3
train.learning_rate: 0.02
attack.kind: label_flip
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(MINIMAL)
    return str(path)


def test_run_writes_outputs(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", config_file, "--out", str(out), "--seed", "3"]) == EXIT_OK
    assert (out / "metrics.csv").read_text().startswith("round,benign_acc,poison_acc")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["seed"] == 3
    assert summary["rounds_completed"] == 2


def test_dump_commitments_flag(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["-v", "run", "-c", config_file, "-o", str(out), "--dump-commitments"]) == EXIT_OK
    assert len(list((out / "commitments").iterdir())) == 5


def test_malformed_config(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("rounds: 2\n\tseed: 1\n")
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG_ERROR
    assert "cannot parse config" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG_ERROR


def test_runtime_error(tmp_path, capsys):
    path = tmp_path / "group.yaml"
    path.write_text(MINIMAL + "partition.method: group\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_RUNTIME_ERROR
    assert "group_column" in capsys.readouterr().err


def test_sweep(config_file, tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", config_file, "--fractions", "0,0.2,0.4", "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == ["fraction_0.00", "fraction_0.20", "fraction_0.40"]
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("byzantine_fraction,byzantine_workers")


def test_sweep_rejects_half_byzantine(config_file, tmp_path):
    args = ["sweep", "--config", config_file, "--fractions", "0.5", "--out", str(tmp_path)]
    assert main(args) == EXIT_CONFIG_ERROR


def test_parse_fractions():
    assert parse_fractions("0, 0.1,0.25") == [0.0, 0.1, 0.25]
    with pytest.raises(ConfigError):
        parse_fractions("0.1,abc")
    with pytest.raises(ConfigError):
        parse_fractions(" , ")


@pytest.mark.slow
def test_oracle_check(capsys):
    assert main(["oracle-check"]) == EXIT_OK
    assert "PASS wasserstein" in capsys.readouterr().out


def test_plot(tmp_path):
    metrics = tmp_path / "metrics.csv"
    metrics.write_text("round,benign_acc,poison_acc\n1,0.400000,\n2,0.700000,\n")
    output = tmp_path / "curve.png"
    assert main(["plot", "--metrics", f"fedcom={metrics}", "--output", str(output)]) == EXIT_OK
    assert output.exists()


def test_subcommand_required():
    with pytest.raises(SystemExit):
        main([])
