"""
Evaluator node: scores the new global model and records the round.
"""

import logging
import time

from fedcom.graph_state import RoundRecord, SimulationState
from fedcom.model import accuracy

logger = logging.getLogger(__name__)


def evaluate_round(state: SimulationState) -> SimulationState:
    """
    Measure benign (and poisoned-eval) accuracy of the current global model.

    Args:
        state: State after aggregation

    Returns:
        Updated state with one more RoundRecord
    """
    try:
        benign = accuracy(state.global_model, state.test_data)
        # Poisoned-eval accuracy only exists for data-poisoning attacks
        poison = accuracy(state.global_model, state.poison_eval) if state.poison_eval is not None else None

        record = RoundRecord(
            round=state.round,
            benign_accuracy=benign,
            poison_accuracy=poison,
            credits=state.last_credits,
            selected=state.last_selection,
            # Measured from the start of local training
            wall_time=time.perf_counter() - (state.round_started_at or time.perf_counter()),
        )
        state.records = [*state.records, record]

        poison_text = f", poison_acc={poison:.4f}" if poison is not None else ""
        logger.info(
            f"Round {state.round}/{state.run_config.rounds}: benign_acc={benign:.4f}{poison_text} "
            f"({record.wall_time:.2f}s)"
        )
        return state

    except Exception as e:
        state.error = f"Error evaluating round {state.round}: {str(e)}"
        logger.error(state.error)
        return state
