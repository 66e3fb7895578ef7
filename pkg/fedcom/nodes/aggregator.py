"""
Aggregator node: combines the round's local models into the next global model.
"""

import logging

import numpy as np

from fedcom.aggregation import AggregationRule, fed_average, fedcom_aggregate, krum_scores, multi_krum_selection
from fedcom.graph_state import CreditMode, SimulationState

logger = logging.getLogger(__name__)


def aggregate_updates(state: SimulationState) -> SimulationState:
    """
    Apply the configured aggregation rule.

    Args:
        state: State with this round's updates

    Returns:
        Updated state with the new global model and, per rule, credits or the Krum selection
    """
    cfg = state.run_config
    sizes = state.worker_sizes
    updates = state.updates
    f = cfg.assumed_byzantine

    try:
        if cfg.rule == AggregationRule.FEDAVG:
            state.global_model = fed_average(updates, sizes)

        elif cfg.rule == AggregationRule.KRUM:
            # A single update becomes the global model; ties go to the lowest index
            scores = krum_scores(updates, f, cfg.krum_neighbors)
            chosen = int(np.argmin(scores))
            state.global_model = updates[chosen]
            state.last_selection = [chosen]

        elif cfg.rule == AggregationRule.MULTIKRUM:
            # Size-weighted average of the n - f - 1 best-scored updates
            selected = sorted(int(i) for i in multi_krum_selection(updates, f, cfg.krum_neighbors))
            state.global_model = fed_average([updates[i] for i in selected], [sizes[i] for i in selected])
            state.last_selection = selected

        else:
            # FedCom: credits on the commitments, median gate, then a size-weighted average
            if cfg.fedcom_credit == CreditMode.TRAINING_ONLY:
                dc = [1.0] * len(updates)
            else:
                dc = state.divergence.dc
            state.global_model, state.last_credits = fedcom_aggregate(
                state.global_model, updates, sizes, state.commitments, dc
            )
            dropped = [i for i, flag in enumerate(state.last_credits.flag) if not flag]
            logger.debug(f"Round {state.round}: FedCom gated out workers {dropped}")

        return state

    except Exception as e:
        state.error = f"Error aggregating round {state.round}: {str(e)}"
        logger.error(state.error)
        return state
