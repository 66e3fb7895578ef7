"""
Node implementations for the FedCom LangGraph workflow.
"""

from fedcom.nodes.aggregator import aggregate_updates
from fedcom.nodes.commitment_collector import collect_commitments
from fedcom.nodes.data_preparer import prepare_data
from fedcom.nodes.evaluator import evaluate_round
from fedcom.nodes.local_trainer import train_workers
from fedcom.nodes.output_generator import generate_output
from fedcom.nodes.report_builder import build_report

__all__ = [
    "prepare_data",
    "collect_commitments",
    "train_workers",
    "aggregate_updates",
    "evaluate_round",
    "build_report",
    "generate_output",
]
