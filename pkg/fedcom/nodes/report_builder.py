"""
Report builder node: assembles the RunReport once every round is done.
"""

import logging
import time

from fedcom.graph_state import RunReport, SimulationState

logger = logging.getLogger(__name__)


def build_report(state: SimulationState) -> SimulationState:
    """Collect records, Byzantine ids and divergences into a RunReport."""
    logger.info("Starting report builder node.")
    # Timed from the data preparer's start
    total = time.perf_counter() - state.started_at if state.started_at is not None else 0.0
    state.report = RunReport(
        config=state.run_config,
        records=state.records,
        byzantine_workers=state.byzantine,
        worker_sizes=state.worker_sizes,
        divergence=state.divergence,
        commitments=state.commitments,
        total_wall_time=total,
    )
    final = state.records[-1]
    logger.info(f"Finished {len(state.records)} rounds in {total:.1f}s, final benign_acc={final.benign_accuracy:.4f}")
    return state
