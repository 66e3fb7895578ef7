"""
Utility to run individual LangGraph nodes for testing and debugging.
"""

import logging
from typing import Optional, Sequence

from fedcom.graph import get_node_function
from fedcom.graph_state import RunConfig, SimulationState

logger = logging.getLogger(__name__)


def run_node(
    node_name: str,
    input_state: Optional[SimulationState] = None,
    config: Optional[RunConfig] = None,
) -> SimulationState:
    """
    Run a single node on a given state.

    Args:
        node_name: Name of the node to run
        input_state: State to use as input
        config: Run configuration for a fresh state (used if input_state is None)

    Returns:
        Updated state after node execution

    Raises:
        ValueError: If the node doesn't exist or neither a state nor a config is given
    """
    node_func = get_node_function(node_name)
    if not node_func:
        raise ValueError(f"Node not found: {node_name}")

    if input_state is None:
        if config is None:
            raise ValueError("Either input_state or config must be provided")
        input_state = SimulationState(run_config=config)

    try:
        updated_state = node_func(input_state)
    except Exception as e:
        logger.error(f"Error executing node '{node_name}': {e}")
        input_state.error = f"Error executing node '{node_name}': {str(e)}"
        return input_state

    if not isinstance(updated_state, SimulationState):
        raise TypeError(f"Node '{node_name}' did not return a SimulationState. Returned: {type(updated_state)}")
    return updated_state


def run_nodes(node_names: Sequence[str], state: SimulationState) -> SimulationState:
    """Run nodes in order, stopping at the first one that sets an error."""
    for name in node_names:
        state = run_node(name, state)
        if state.error:
            break
    return state
