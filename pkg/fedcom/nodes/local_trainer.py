"""
Local trainer node: broadcasts the global model and collects one local model per worker.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List

from fedcom.attacks import AttackKind, gaussian_model, krum_attack, krum_lambda_bound
from fedcom.graph_state import SeedStream, SimulationState, derive_seed
from fedcom.model import ParameterVector, train_local

logger = logging.getLogger(__name__)


def _train_worker(state: SimulationState, worker: int) -> ParameterVector:
    cfg = state.run_config
    train_cfg = cfg.train.model_copy(update={"seed": derive_seed(cfg.seed, SeedStream.TRAIN, state.round, worker)})
    return train_local(state.global_model, state.local_data[worker], train_cfg)


def _lambda_max(state: SimulationState, benign: List[ParameterVector], n_attackers: int) -> float:
    attack = state.run_config.attack
    if not attack.relative_lambda:
        return attack.lambda_max
    bound = krum_lambda_bound(benign, state.global_model, n_attackers)
    # Benign updates identical to the global model leave nothing to scale by
    return attack.lambda_max * bound if bound > 0 else attack.lambda_max


def _train_all(state: SimulationState, workers: List[int]) -> List[ParameterVector]:
    max_workers = state.run_config.max_workers
    if max_workers <= 1 or len(workers) <= 1:
        return [_train_worker(state, worker) for worker in workers]
    # map() yields in submission order, so results stay in worker-index order.
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda worker: _train_worker(state, worker), workers))


def train_workers(state: SimulationState) -> SimulationState:
    """
    Run one round of local training.

    Honest workers and data poisoners train on their local data. Model poisoners
    replace their update with Gaussian noise or a Krum-attack model crafted against
    this round's benign updates.

    Args:
        state: State holding the current global model

    Returns:
        Updated state with one update per worker, in worker-index order
    """
    cfg = state.run_config
    state.round += 1
    state.round_started_at = time.perf_counter()
    logger.debug(f"Round {state.round}: starting local training.")

    try:
        kind = cfg.attack.kind
        byzantine = set(state.byzantine)
        model_poisoners = sorted(byzantine) if kind.poisons_model else []
        trainers = [w for w in range(cfg.worker_count) if w not in set(model_poisoners)]

        # Honest workers and data poisoners train from the global model
        updates = dict(zip(trainers, _train_all(state, trainers)))

        # Model poisoners replace their update
        if kind == AttackKind.GAUSSIAN:
            for worker in model_poisoners:
                seed = derive_seed(cfg.seed, SeedStream.ATTACK, state.round, worker)
                updates[worker] = gaussian_model(state.arch, cfg.attack.gaussian_sigma, seed)
        elif kind == AttackKind.KRUM_ATTACK and model_poisoners:
            # Attackers know every honest update of this round
            benign = [updates[w] for w in trainers]
            result = krum_attack(
                benign,
                state.global_model,
                f=cfg.assumed_byzantine,
                n_attackers=len(model_poisoners),
                lambda_max=_lambda_max(state, benign, len(model_poisoners)),
                seed=derive_seed(cfg.seed, SeedStream.ATTACK, state.round),
                neighbor_count=cfg.krum_neighbors,
                max_halvings=cfg.attack.max_halvings,
                jitter_scale=cfg.attack.jitter_scale,
                refinements=cfg.attack.lambda_refinements,
            )
            if not result.selected:
                logger.warning(f"Round {state.round}: Krum attack found no selected model, lambda={result.lam:.3e}")
            for worker, update in zip(model_poisoners, result.updates):
                updates[worker] = update

        state.updates = [updates[worker] for worker in range(cfg.worker_count)]
        return state

    except Exception as e:
        state.error = f"Error in local training (round {state.round}): {str(e)}"
        logger.error(state.error)
        return state
