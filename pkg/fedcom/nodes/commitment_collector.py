"""
Commitment collector node.

Every worker submits a commitment before training starts. Honest workers commit to
their own data; Byzantine workers follow the configured HC/FC strategy. FedCom runs
turn the commitments into Data Credit once, here.
"""

import logging

from fedcom.aggregation import AggregationRule
from fedcom.attacks import make_commitment
from fedcom.commitment import build_commitment, divergences
from fedcom.graph_state import SimulationState

logger = logging.getLogger(__name__)


def collect_commitments(state: SimulationState) -> SimulationState:
    """
    Build one commitment per worker and, for FedCom, the divergence report.

    Args:
        state: State with local datasets and Byzantine ids

    Returns:
        Updated state with commitments and (fedcom only) divergence report
    """
    cfg = state.run_config
    logger.info("Starting commitment collector node.")

    needs_commitments = cfg.rule == AggregationRule.FEDCOM or cfg.dump_commitments
    if not needs_commitments:
        logger.info(f"Rule '{cfg.rule.value}' uses no commitments, skipping.")
        return state

    try:
        # Commitments are built once, before the first round
        byzantine = set(state.byzantine)
        commitments = []
        for worker, (local, clean) in enumerate(zip(state.local_data, state.clean_partitions)):
            if worker in byzantine:
                # HC commits to the poisoned data, FC to the clean partition
                commitments.append(make_commitment(cfg.attack.commitment_strategy, local, clean, cfg.commitment_m))
            else:
                commitments.append(build_commitment(local, cfg.commitment_m))
        state.commitments = commitments

        # Data Credit only feeds FedCom; dumps alone do not need it
        if cfg.rule == AggregationRule.FEDCOM:
            report = divergences(commitments)
            state.divergence = report
            logger.info(f"Data Credit: mu={report.mu:.4f}, sigma={report.sigma:.4f}")
            for worker in sorted(byzantine):
                logger.debug(f"Byzantine worker {worker}: d={report.distances[worker]:.4f}, dc={report.dc[worker]:.4f}")

        logger.info("Finished commitment collector node.")
        return state

    except Exception as e:
        state.error = f"Error collecting commitments: {str(e)}"
        logger.error(state.error)
        return state
