"""
Data preparer node: builds the data, splits it among workers, designates the
Byzantine workers and poisons their local datasets.
"""

import logging
import time
from typing import Optional, Tuple

import numpy as np

from fedcom.aggregation import AggregationRule, krum_guarantee_holds
from fedcom.attacks import AttackKind, back_gradient_poison, label_flip
from fedcom.data import (
    Dataset,
    PartitionSpec,
    concatenate,
    generate_blobs,
    load_csv,
    min_max_bounds,
    partition_by_group,
    partition_dirichlet,
    scale_min_max,
    split_indices,
)
from fedcom.graph_state import (
    DataSourceKind,
    PartitionMethod,
    RunConfig,
    SeedStream,
    SimulationState,
    derive_seed,
)
from fedcom.model import ModelArch, ParameterVector, TrainConfig, init_model, train_local

logger = logging.getLogger(__name__)


def _load_source(cfg: RunConfig) -> Tuple[Dataset, Dataset, Optional[np.ndarray]]:
    """Return (train, test, train group ids)."""
    source = cfg.source
    if source.kind == DataSourceKind.SYNTHETIC:
        full = generate_blobs(
            source.class_count,
            source.per_class,
            source.dim,
            source.separation,
            derive_seed(cfg.seed, SeedStream.DATA),
            noise_scale=source.noise_scale,
        )
        groups = None
    else:
        full, groups = load_csv(source.csv_path, source.label_column, source.group_column, has_header=source.has_header)

    if source.kind == DataSourceKind.CSV and source.test_csv_path:
        test, _ = load_csv(
            source.test_csv_path, source.label_column, source.group_column, has_header=source.has_header
        )
        class_count = max(full.class_count, test.class_count)
        full = Dataset(features=full.features, labels=full.labels, class_count=class_count)
        test = Dataset(features=test.features, labels=test.labels, class_count=class_count)
        return full, test, groups

    train_rows, test_rows = split_indices(full, cfg.test_fraction, derive_seed(cfg.seed, SeedStream.SPLIT))
    train_groups = groups[train_rows] if groups is not None else None
    return full.subset(train_rows), full.subset(test_rows), train_groups


def _train_surrogate(cfg: RunConfig, arch: ModelArch, clean: Dataset, worker: int) -> ParameterVector:
    surrogate_cfg = TrainConfig(
        local_epochs=cfg.attack.surrogate_epochs,
        batch_size=cfg.train.batch_size,
        learning_rate=cfg.attack.surrogate_learning_rate,
        seed=derive_seed(cfg.seed, SeedStream.SURROGATE, worker),
    )
    start = init_model(arch, derive_seed(cfg.seed, SeedStream.SURROGATE, worker, 0))
    return train_local(start, clean, surrogate_cfg)


def prepare_data(state: SimulationState) -> SimulationState:
    """
    Build every worker's local dataset and the evaluation sets.

    Args:
        state: Graph state holding the run configuration

    Returns:
        Updated state with partitions, Byzantine ids, eval sets and the initial global model
    """
    cfg = state.run_config
    logger.info("Starting data preparer node.")
    state.started_at = time.perf_counter()

    try:
        # Load or generate the data and hold out the test split
        train, test, groups = _load_source(cfg)

        # Scaling is fitted on the training split only
        if cfg.normalize:
            low, high = min_max_bounds(train)
            train, test = scale_min_max(train, low, high), scale_min_max(test, low, high)

        partition_seed = derive_seed(cfg.seed, SeedStream.PARTITION)
        if cfg.partition.method == PartitionMethod.GROUP:
            if groups is None:
                state.error = "Partition method 'group' needs source.group_column"
                logger.error(state.error)
                return state
            partitions = partition_by_group(train, groups, cfg.worker_count, partition_seed)
        else:
            spec = PartitionSpec(
                worker_count=cfg.worker_count,
                dirichlet_alpha=cfg.partition.dirichlet_alpha,
                size_imbalance=cfg.partition.size_imbalance,
                # commitments need more than m rows per worker
                min_rows=max(cfg.commitment_m + 1, 1),
                seed=partition_seed,
            )
            partitions = partition_dirichlet(train, spec)

        # Designate the Byzantine workers
        rng = np.random.default_rng(derive_seed(cfg.seed, SeedStream.BYZANTINE))
        byzantine = sorted(int(i) for i in rng.permutation(cfg.worker_count)[: cfg.byzantine_count])
        if cfg.rule in (AggregationRule.KRUM, AggregationRule.MULTIKRUM) and not krum_guarantee_holds(
            cfg.worker_count, cfg.assumed_byzantine
        ):
            logger.warning(
                f"Krum assumes f < (n - 2) / 2, which fails for n={cfg.worker_count}, f={cfg.assumed_byzantine}; "
                "its selection is not guaranteed to be robust"
            )

        arch = ModelArch(
            kind=cfg.model.kind,
            input_dim=train.dim,
            hidden_dim=cfg.model.hidden_dim,
            class_count=train.class_count,
        )

        # Poison the local data of data-poisoning attackers
        local_data = list(partitions)
        kind = cfg.attack.kind
        if kind == AttackKind.LABEL_FLIP:
            for worker in byzantine:
                local_data[worker] = label_flip(partitions[worker])
        elif kind == AttackKind.BACK_GRADIENT:
            bounds = min_max_bounds(train)
            for worker in byzantine:
                surrogate = _train_surrogate(cfg, arch, partitions[worker], worker)
                local_data[worker] = back_gradient_poison(
                    partitions[worker], surrogate, cfg.attack.poison_steps, cfg.attack.poison_step_size, bounds
                )

        # Evaluation set for the poisoned-accuracy metric
        poison_eval = None
        if kind == AttackKind.LABEL_FLIP:
            poison_eval = label_flip(test)
        elif kind == AttackKind.BACK_GRADIENT and byzantine:
            poison_eval = concatenate([local_data[worker] for worker in byzantine])

        state.arch = arch
        state.train_data = train
        state.test_data = test
        state.poison_eval = poison_eval
        state.clean_partitions = partitions
        state.local_data = local_data
        state.byzantine = byzantine
        state.global_model = init_model(arch, derive_seed(cfg.seed, SeedStream.INIT))
        state.round = 0

        logger.info(
            f"Prepared {len(train)} train / {len(test)} test rows over {cfg.worker_count} workers "
            f"(sizes {min(state.worker_sizes)}-{max(state.worker_sizes)}), Byzantine workers: {byzantine}"
        )
        logger.info("Finished data preparer node.")
        return state

    except Exception as e:
        state.error = f"Error preparing data: {str(e)}"
        logger.error(state.error)
        return state
