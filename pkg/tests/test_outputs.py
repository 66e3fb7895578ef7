"""
Tests for metrics.csv, summary.json, commitment dumps and the sweep table.
"""

import os

import pandas as pd
import pytest

from fedcom.aggregation import CreditReport
from fedcom.commitment import build_commitment
from fedcom.graph_state import RoundRecord, RunConfig, RunReport
from fedcom.nodes.output_generator import (
    METRICS_FILE,
    SUMMARY_FILE,
    emit_csv,
    emit_summary_json,
    emit_sweep_csv,
    load_summary,
    metrics_frame,
    summarize,
    write_outputs,
)


def _credits(weights):
    k = len(weights)
    return CreditReport(
        dc=[0.5] * k,
        tc=[1.25] * k,
        l=[0.8] * k,
        score=[0.625] * k,
        flag=[1 if w > 0 else 0 for w in weights],
        weight=list(weights),
    )


@pytest.fixture
def fedcom_report():
    records = [
        RoundRecord(round=1, benign_accuracy=0.5, poison_accuracy=0.1, credits=_credits([0.5, 0.5, 0.0])),
        RoundRecord(round=2, benign_accuracy=0.875, poison_accuracy=0.05, credits=_credits([0.25, 0.75, 0.0])),
    ]
    return RunReport(config=RunConfig(worker_count=3), records=records, byzantine_workers=[2], worker_sizes=[4, 4, 4])


@pytest.fixture
def plain_report():
    cfg = RunConfig(rule="fedavg", rounds=1)
    return RunReport(config=cfg, records=[RoundRecord(round=1, benign_accuracy=0.75)], worker_sizes=[10] * 20)


class TestMetricsCsv:
    def test_single_round_without_poison(self, plain_report, tmp_path):
        path = tmp_path / METRICS_FILE
        emit_csv(plain_report, str(path))
        lines = path.read_text().splitlines()
        assert lines == ["round,benign_acc,poison_acc", "1,0.750000,"]

    def test_credit_columns(self, fedcom_report):
        frame = metrics_frame(fedcom_report)
        assert list(frame.columns[:3]) == ["round", "benign_acc", "poison_acc"]
        assert {"w0_dc", "w1_tc", "w2_weight"} <= set(frame.columns)
        assert frame["w1_weight"].tolist() == [0.5, 0.75]

    def test_reread_matches_report(self, fedcom_report, tmp_path):
        path = tmp_path / METRICS_FILE
        emit_csv(fedcom_report, str(path))
        frame = pd.read_csv(path)
        assert frame["round"].tolist() == [1, 2]
        for row, record in zip(frame.itertuples(), fedcom_report.records):
            assert row.benign_acc == pytest.approx(record.benign_accuracy, abs=1e-6)
            assert row.poison_acc == pytest.approx(record.poison_accuracy, abs=1e-6)
            assert row.w0_weight == pytest.approx(record.credits.weight[0], abs=1e-6)

    def test_unwritable_path(self, plain_report, tmp_path):
        with pytest.raises(OSError):
            emit_csv(plain_report, str(tmp_path / "missing" / "nested" / METRICS_FILE))


class TestSummary:
    def test_final_and_best(self, fedcom_report):
        summary = summarize(fedcom_report)
        assert summary["rounds_completed"] == 2
        assert summary["final_benign_acc"] == 0.875
        assert summary["best_benign_acc"] == 0.875
        assert summary["final_poison_acc"] == 0.05
        assert summary["best_poison_acc"] == 0.1
        assert summary["final_credits"]["weight"] == [0.25, 0.75, 0.0]
        assert summary["byzantine_workers"] == [2]

    def test_no_poison_keys_without_attack(self, plain_report):
        summary = summarize(plain_report)
        assert "final_poison_acc" not in summary
        assert "final_credits" not in summary

    def test_config_round_trips(self, fedcom_report, tmp_path):
        path = tmp_path / SUMMARY_FILE
        emit_summary_json(fedcom_report, str(path))
        summary = load_summary(str(path))
        assert RunConfig.model_validate(summary["config"]) == fedcom_report.config

    def test_empty_report(self):
        with pytest.raises(ValueError):
            summarize(RunReport(config=RunConfig()))


class TestWriteOutputs:
    def test_writes_both_files(self, plain_report, tmp_path):
        paths = write_outputs(plain_report, str(tmp_path / "out"))
        assert os.path.isfile(paths["metrics"])
        assert os.path.isfile(paths["summary"])
        assert "commitments" not in paths

    def test_commitment_dump(self, blobs, tmp_path):
        report = RunReport(
            config=RunConfig(rounds=1),
            records=[RoundRecord(round=1, benign_accuracy=1.0)],
            commitments=[build_commitment(blobs, m=3), build_commitment(blobs, m=4)],
        )
        paths = write_outputs(report, str(tmp_path), include_commitments=True)
        assert sorted(os.listdir(paths["commitments"])) == ["worker_0.csv", "worker_1.csv"]
        assert "commitments" not in load_summary(paths["summary"])


def test_sweep_table(fedcom_report, plain_report, tmp_path):
    path = tmp_path / "sweep.csv"
    emit_sweep_csv([0.0, 0.3], [plain_report, fedcom_report], str(path))
    frame = pd.read_csv(path)
    assert frame["byzantine_fraction"].tolist() == [0.0, 0.3]
    assert frame["byzantine_workers"].tolist() == [0, 1]
    assert pd.isna(frame["final_poison_acc"][0])
    assert frame["final_poison_acc"][1] == pytest.approx(0.05)
