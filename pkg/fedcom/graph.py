"""
LangGraph setup for the FedCom simulation workflow.
"""

import logging
from typing import Callable, Optional

from langgraph.graph import END, StateGraph

from fedcom.errors import SimulationError
from fedcom.graph_state import RunConfig, RunReport, SimulationState
from fedcom.nodes.aggregator import aggregate_updates
from fedcom.nodes.commitment_collector import collect_commitments
from fedcom.nodes.data_preparer import prepare_data
from fedcom.nodes.evaluator import evaluate_round
from fedcom.nodes.local_trainer import train_workers
from fedcom.nodes.output_generator import generate_output
from fedcom.nodes.report_builder import build_report

logger = logging.getLogger(__name__)

NODES = {
    "data_preparer": prepare_data,
    "commitment_collector": collect_commitments,
    "local_trainer": train_workers,
    "aggregator": aggregate_updates,
    "evaluator": evaluate_round,
    "report_builder": build_report,
    "output_generator": generate_output,
}


def _unless_error(target: str) -> Callable[[SimulationState], str]:
    def route(state: SimulationState) -> str:
        return END if state.error else target

    return route


def _after_evaluation(state: SimulationState) -> str:
    if state.error:
        return END
    if state.round < state.run_config.rounds:
        return "local_trainer"
    return "report_builder"


def create_graph():
    """
    Create the FedCom workflow graph.

    data_preparer -> commitment_collector -> (local_trainer -> aggregator -> evaluator)
    repeated for every round -> report_builder -> output_generator. Any node that sets
    state.error ends the run.
    """
    # Define the graph with the SimulationState as the state type
    workflow = StateGraph(SimulationState)

    # Add all nodes to the graph
    for name, node in NODES.items():
        workflow.add_node(name, node)

    # Connect the one-shot steps; an error on any of them ends the run
    linear = [
        ("data_preparer", "commitment_collector"),
        ("commitment_collector", "local_trainer"),
        ("local_trainer", "aggregator"),
        ("aggregator", "evaluator"),
        ("report_builder", "output_generator"),
    ]
    for source, target in linear:
        workflow.add_conditional_edges(source, _unless_error(target), [target, END])

    # The evaluator closes a round: loop back to training until the last round
    workflow.add_conditional_edges("evaluator", _after_evaluation, ["local_trainer", "report_builder", END])
    workflow.add_edge("output_generator", END)

    # Define entry point
    workflow.set_entry_point("data_preparer")

    # Compile the graph
    return workflow.compile()


def get_node_function(node_name: str) -> Optional[Callable[[SimulationState], SimulationState]]:
    """Get a specific node function for testing."""
    return NODES.get(node_name)


def recursion_limit(cfg: RunConfig) -> int:
    """Super-steps a run needs: three per round plus the fixed nodes, with headroom."""
    return 3 * cfg.rounds + 10


def run(cfg: RunConfig) -> RunReport:
    """
    Run one complete simulation.

    Args:
        cfg: Validated run configuration

    Returns:
        The run's report (outputs are also written when cfg.output_dir is set)

    Raises:
        SimulationError: If any workflow node failed
    """
    workflow = create_graph()
    # invoke() returns the final state as a plain dict
    final_state = workflow.invoke({"run_config": cfg}, config={"recursion_limit": recursion_limit(cfg)})

    error = final_state.get("error")
    if error:
        raise SimulationError(error)
    report = final_state.get("report")
    if report is None:
        raise SimulationError("Workflow finished without a report")
    return report
