"""
Implementation of the output generator node for the FedCom workflow.

Writes metrics.csv, summary.json and (optionally) the commitment dumps of a run.
"""

import json
import logging
import os
from typing import Any, Dict, List, Sequence

import pandas as pd

from fedcom.graph_state import RunReport, SimulationState

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"
COMMITMENTS_DIR = "commitments"
SWEEP_FILE = "sweep.csv"
FLOAT_FORMAT = "%.6f"


def metrics_frame(report: RunReport) -> pd.DataFrame:
    """
    One row per round: round, benign_acc, poison_acc and, for FedCom, w<i>_dc, w<i>_tc, w<i>_weight.
    """
    rows = []
    for record in report.records:
        row: Dict[str, Any] = {
            "round": record.round,
            "benign_acc": record.benign_accuracy,
            "poison_acc": record.poison_accuracy,
        }
        # Credit columns only exist for FedCom runs
        if record.credits is not None:
            for worker, (dc, tc, weight) in enumerate(
                zip(record.credits.dc, record.credits.tc, record.credits.weight)
            ):
                row[f"w{worker}_dc"] = dc
                row[f"w{worker}_tc"] = tc
                row[f"w{worker}_weight"] = weight
        rows.append(row)
    frame = pd.DataFrame(rows)
    # An all-missing column would otherwise be written as object dtype
    frame["poison_acc"] = frame["poison_acc"].astype("float64")
    return frame


def emit_csv(report: RunReport, path: str) -> None:
    """Write the per-round metrics; missing poison accuracy is an empty cell."""
    metrics_frame(report).to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")


def summarize(report: RunReport) -> Dict[str, Any]:
    """
    JSON-ready summary: config echo, final/best accuracies, final credits and timings.

    Poison fields are present only when the run had a poisoned eval set.
    """
    if not report.records:
        raise ValueError("Report has no rounds to summarize")
    final = report.records[-1]
    summary: Dict[str, Any] = {
        "config": report.config.model_dump(mode="json"),
        "rounds_completed": len(report.records),
        "final_benign_acc": final.benign_accuracy,
        "best_benign_acc": max(r.benign_accuracy for r in report.records),
    }
    if final.poison_accuracy is not None:
        summary["final_poison_acc"] = final.poison_accuracy
        summary["best_poison_acc"] = max(r.poison_accuracy for r in report.records)
    if final.credits is not None:
        summary["final_credits"] = final.credits.model_dump()
    if final.selected is not None:
        summary["final_selection"] = final.selected
    summary["byzantine_workers"] = report.byzantine_workers
    summary["worker_sizes"] = report.worker_sizes
    if report.divergence is not None:
        summary["divergence"] = report.divergence.model_dump()
    summary["total_wall_time"] = report.total_wall_time
    return summary


def emit_summary_json(report: RunReport, path: str) -> None:
    with open(path, "w") as f:
        json.dump(summarize(report), f, indent=2)


def load_summary(path: str) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


def dump_commitments(report: RunReport, directory: str) -> List[str]:
    """Write commitments/worker_<i>.csv for every worker; returns the written paths."""
    target = os.path.join(directory, COMMITMENTS_DIR)
    os.makedirs(target, exist_ok=True)
    paths = []
    for worker, commitment in enumerate(report.commitments):
        path = os.path.join(target, f"worker_{worker}.csv")
        commitment.to_csv(path)
        paths.append(path)
    return paths


def sweep_frame(fractions: Sequence[float], reports: Sequence[RunReport]) -> pd.DataFrame:
    """One row per Byzantine fraction with final/best benign and final poison accuracy."""
    rows = []
    for fraction, report in zip(fractions, reports):
        final = report.records[-1]
        rows.append(
            {
                "byzantine_fraction": fraction,
                "byzantine_workers": len(report.byzantine_workers),
                "final_benign_acc": final.benign_accuracy,
                "best_benign_acc": max(r.benign_accuracy for r in report.records),
                "final_poison_acc": final.poison_accuracy,
            }
        )
    frame = pd.DataFrame(rows)
    frame["final_poison_acc"] = frame["final_poison_acc"].astype("float64")
    return frame


def emit_sweep_csv(fractions: Sequence[float], reports: Sequence[RunReport], path: str) -> None:
    sweep_frame(fractions, reports).to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")


def write_outputs(report: RunReport, directory: str, include_commitments: bool = False) -> Dict[str, str]:
    """Write every output file of a run into directory; returns a name -> path map."""
    os.makedirs(directory, exist_ok=True)
    paths = {
        "metrics": os.path.join(directory, METRICS_FILE),
        "summary": os.path.join(directory, SUMMARY_FILE),
    }
    emit_csv(report, paths["metrics"])
    emit_summary_json(report, paths["summary"])
    if include_commitments:
        written = dump_commitments(report, directory)
        paths["commitments"] = os.path.join(directory, COMMITMENTS_DIR)
        logger.info(f"Dumped {len(written)} commitments to {paths['commitments']}")
    return paths


def generate_output(state: SimulationState) -> SimulationState:
    """
    Writes the run's output files when an output directory is configured.

    Args:
        state: Current workflow state with a finished report

    Returns:
        Updated workflow state (no changes needed)
    """
    logger.info("Starting output generator node.")
    directory = state.run_config.output_dir
    if not directory:
        logger.info("No output directory configured, nothing written.")
        return state

    try:
        paths = write_outputs(state.report, directory, include_commitments=state.run_config.dump_commitments)
        logger.info(f"Wrote {paths['metrics']} and {paths['summary']}")
        return state

    except Exception as e:
        state.error = f"Error generating output: {str(e)}"
        logger.error(state.error)
        return state
