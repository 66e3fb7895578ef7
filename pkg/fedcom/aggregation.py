"""
Server-side aggregation rules: FedAverage, Krum, Multi-Krum and FedCom.
"""

import logging
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.spatial.distance import cdist

from fedcom.commitment import Commitment
from fedcom.errors import DimensionMismatchError, EmptyInputError, InvalidArgumentError, TooFewUpdatesError
from fedcom.model import ParameterVector, loss

logger = logging.getLogger(__name__)

CREDIT_EPSILON = 1e-12


class AggregationRule(str, Enum):
    """Aggregation rules the server can run."""

    FEDAVG = "fedavg"
    KRUM = "krum"
    MULTIKRUM = "multikrum"
    FEDCOM = "fedcom"


class CreditReport(BaseModel):
    """Per-worker FedCom credits for one round."""

    dc: List[float]
    tc: List[float]
    l: List[float]
    score: List[float]
    flag: List[int]
    weight: List[float]


def _stack(updates: Sequence[ParameterVector]) -> np.ndarray:
    if not updates:
        raise EmptyInputError("No updates to aggregate")
    arch = updates[0].arch
    for i, update in enumerate(updates):
        if update.arch != arch:
            raise DimensionMismatchError(f"Update {i} has architecture {update.arch}, expected {arch}")
    return np.vstack([update.values for update in updates])


def _weighted_sum(updates: Sequence[ParameterVector], weights: np.ndarray) -> ParameterVector:
    matrix = _stack(updates)
    # Fixed worker-index order keeps the reduction bit-reproducible.
    total = np.zeros(matrix.shape[1])
    for weight, row in zip(weights, matrix):
        if weight != 0.0:
            total += weight * row
    return updates[0].with_values(total)


def fed_average(updates: Sequence[ParameterVector], sizes: Sequence[int]) -> ParameterVector:
    """Size-weighted mean of the updates."""
    if not updates:
        raise EmptyInputError("No updates to average")
    sizes = np.asarray(sizes, dtype=np.float64)
    if len(sizes) != len(updates):
        raise InvalidArgumentError(f"{len(sizes)} sizes for {len(updates)} updates")
    if np.any(sizes <= 0):
        raise InvalidArgumentError("Dataset sizes must be positive")
    return _weighted_sum(updates, sizes / sizes.sum())


def krum_scores(
    updates: Sequence[ParameterVector], f: int, neighbor_count: Optional[int] = None
) -> np.ndarray:
    """
    Sum of plain Euclidean distances from each update to its n - f - 1 nearest other updates.

    Args:
        updates: Local models
        f: Assumed upper bound on Byzantine workers
        neighbor_count: Override for the n - f - 1 neighbourhood size

    Returns:
        One score per update
    """
    matrix = _stack(updates)
    k = len(updates)
    if f < 0:
        raise InvalidArgumentError(f"f must be non-negative, got {f}")
    neighbours = k - f - 1 if neighbor_count is None else neighbor_count
    if k < f + 2 or not 1 <= neighbours <= k - 1:
        raise TooFewUpdatesError(f"Krum needs at least f + 2 = {f + 2} updates and 1..{k - 1} neighbours, "
                                 f"got {k} updates and {neighbours} neighbours")

    distances = cdist(matrix, matrix)
    np.fill_diagonal(distances, np.inf)
    nearest = np.sort(distances, axis=1)[:, :neighbours]
    return nearest.sum(axis=1)


def krum_guarantee_holds(worker_count: int, f: int) -> bool:
    """Whether Krum's robustness bound f < (n - 2) / 2 holds."""
    return 2 * f + 2 < worker_count


def krum(updates: Sequence[ParameterVector], f: int, neighbor_count: Optional[int] = None) -> ParameterVector:
    """The update with the lowest Krum score (smallest index on ties)."""
    scores = krum_scores(updates, f, neighbor_count)
    return updates[int(np.argmin(scores))]


def multi_krum_selection(
    updates: Sequence[ParameterVector], f: int, neighbor_count: Optional[int] = None
) -> np.ndarray:
    """Indices of the n - f - 1 lowest-score updates, ordered by score then index."""
    scores = krum_scores(updates, f, neighbor_count)
    keep = len(updates) - f - 1
    return np.argsort(scores, kind="stable")[:keep]


def multi_krum(
    updates: Sequence[ParameterVector], sizes: Sequence[int], f: int, neighbor_count: Optional[int] = None
) -> ParameterVector:
    """FedAverage over the n - f - 1 updates with the lowest Krum scores."""
    selected = np.sort(multi_krum_selection(updates, f, neighbor_count))
    return fed_average([updates[i] for i in selected], [sizes[i] for i in selected])


def training_credits(deltas: Sequence[float]) -> np.ndarray:
    """
    Training Credit from loss decreases.

    Workers whose loss did not decrease get 0; the others get the inverse of their total
    absolute gap to every positive delta, so a decrease typical of the cohort scores highest.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    positive = deltas[deltas > 0]
    credits = np.zeros(len(deltas))
    for i, delta in enumerate(deltas):
        if delta > 0:
            credits[i] = 1.0 / (CREDIT_EPSILON + np.abs(delta - positive).sum())
    return credits


def lower_median(values: Sequence[float]) -> float:
    """Median taking the lower of the two middle values for even lengths."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    return float(ordered[(len(ordered) - 1) // 2])


def gated_weights(flags: Sequence[int], sizes: Sequence[int]) -> np.ndarray:
    """Size-proportional weights over flagged workers; unflagged workers get 0."""
    flags = np.asarray(flags, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    if len(flags) != len(sizes):
        raise InvalidArgumentError(f"length mismatch: {len(flags)} flags for {len(sizes)} sizes")
    gated = flags * sizes
    if gated.sum() <= 0:
        raise InvalidArgumentError("No worker passed the median gate")
    return gated / gated.sum()


def fedcom_weights(
    dc: Sequence[float],
    tc: Sequence[float],
    sizes: Sequence[int],
    deltas: Optional[Sequence[float]] = None,
) -> CreditReport:
    """
    Median-gated aggregation weights from DC * TC.

    A worker passes when its score is at least the lower median, so at least ceil(k/2)
    workers always pass; passing workers share the weight in proportion to dataset size.
    """
    dc = np.asarray(dc, dtype=np.float64)
    tc = np.asarray(tc, dtype=np.float64)
    if not len(dc) == len(tc) == len(sizes) or (deltas is not None and len(deltas) != len(dc)):
        raise InvalidArgumentError(f"length mismatch: dc={len(dc)}, tc={len(tc)}, sizes={len(sizes)}")
    if np.any(np.asarray(sizes) <= 0):
        raise InvalidArgumentError("Dataset sizes must be positive")

    scores = dc * tc
    flags = (scores >= lower_median(scores)).astype(np.int64)
    weights = gated_weights(flags, sizes)
    return CreditReport(
        dc=dc.tolist(),
        tc=tc.tolist(),
        l=list(deltas) if deltas is not None else [0.0] * len(dc),
        score=scores.tolist(),
        flag=flags.tolist(),
        weight=weights.tolist(),
    )


def loss_deltas(
    global_model: ParameterVector, updates: Sequence[ParameterVector], commitments: Sequence[Commitment]
) -> np.ndarray:
    """l_i = loss(global, commitment_i) - loss(update_i, commitment_i)."""
    if len(updates) != len(commitments):
        raise InvalidArgumentError(f"{len(updates)} updates for {len(commitments)} commitments")
    return np.array(
        [loss(global_model, c.data) - loss(update, c.data) for update, c in zip(updates, commitments)]
    )


def fedcom_aggregate(
    global_model: ParameterVector,
    updates: Sequence[ParameterVector],
    sizes: Sequence[int],
    commitments: Sequence[Commitment],
    dc: Sequence[float],
) -> Tuple[ParameterVector, CreditReport]:
    """
    One FedCom aggregation round.

    Args:
        global_model: Model distributed at the start of the round
        updates: Local models returned by the workers
        sizes: Reported local dataset sizes
        commitments: Commitments submitted before training
        dc: Data Credit computed once from the commitments

    Returns:
        Tuple of (new global model, credit report)
    """
    deltas = loss_deltas(global_model, updates, commitments)
    tc = training_credits(deltas)
    report = fedcom_weights(dc, tc, sizes, deltas=deltas.tolist())
    new_global = _weighted_sum(updates, np.asarray(report.weight))
    logger.debug(f"FedCom kept {sum(report.flag)}/{len(updates)} updates")
    return new_global, report
