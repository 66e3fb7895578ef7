"""
Data commitments: m-nearest-neighbour averaged datasets, per-dimension Wasserstein
divergences between commitments and the Data Credit derived from them.
"""

import logging
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist
from scipy.stats import norm

from fedcom.data import Dataset, write_csv
from fedcom.errors import DimensionMismatchError, EmptyInputError, InvalidArgumentError

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-12
DISTANCE_BLOCK_ROWS = 512


class Commitment(BaseModel):
    """Crafted dataset submitted once by a worker before training starts."""

    model_config = ConfigDict(frozen=True)

    data: Dataset
    m: int = Field(..., ge=2)

    def __len__(self) -> int:
        return len(self.data)

    def to_csv(self, path: str) -> None:
        write_csv(self.data, path)


class DivergenceReport(BaseModel):
    """Per-worker divergence from the pooled other commitments and the resulting Data Credit."""

    distances: List[float]
    mu: float
    sigma: float
    dc: List[float]


def _nearest_neighbours(features: np.ndarray, m: int) -> np.ndarray:
    """Indices of the m nearest other rows for every row, closest first (ties by index)."""
    n = features.shape[0]
    neighbours = np.empty((n, m), dtype=np.int64)
    for start in range(0, n, DISTANCE_BLOCK_ROWS):
        stop = min(start + DISTANCE_BLOCK_ROWS, n)
        distances = cdist(features[start:stop], features)
        distances[np.arange(stop - start), np.arange(start, stop)] = np.inf
        neighbours[start:stop] = np.argsort(distances, axis=1, kind="stable")[:, :m]
    return neighbours


def _majority_label(labels: np.ndarray, class_count: int) -> int:
    """Most frequent label; ties go to the label of the nearest member holding a tied count."""
    counts = np.bincount(labels, minlength=class_count)
    top = counts.max()
    for label in labels:
        if counts[label] == top:
            return int(label)
    return int(labels[0])


def build_commitment(dataset: Dataset, m: int = 5) -> Commitment:
    """
    Replace every sample by the mean of its m nearest other samples.

    Args:
        dataset: Worker's local training data
        m: Neighbourhood size (>= 2; the sample itself is never part of its neighbourhood)

    Returns:
        Commitment with one crafted sample per source sample, in source order
    """
    if m < 2:
        raise InvalidArgumentError(f"invalid m: commitments need m >= 2, got {m}")
    if len(dataset) <= m:
        raise InvalidArgumentError(f"invalid m: need more than m={m} samples, got {len(dataset)}")

    neighbours = _nearest_neighbours(dataset.features, m)
    crafted = dataset.features[neighbours].mean(axis=1)
    labels = np.array(
        [_majority_label(dataset.labels[row], dataset.class_count) for row in neighbours], dtype=np.int64
    )
    data = Dataset(features=crafted, labels=labels, class_count=dataset.class_count)
    return Commitment(data=data, m=m)


def wasserstein_1d(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Wasserstein-1 distance between two empirical distributions on the real line.

    Integrates |F_a^-1(u) - F_b^-1(u)| over u in (0, 1); both quantile functions are
    piecewise constant between the merged breakpoints {i/|a|} and {j/|b|}.
    """
    a_sorted = np.sort(np.asarray(a, dtype=np.float64).reshape(-1))
    b_sorted = np.sort(np.asarray(b, dtype=np.float64).reshape(-1))
    if len(a_sorted) == 0 or len(b_sorted) == 0:
        raise EmptyInputError("wasserstein_1d needs two nonempty samples")

    na, nb = len(a_sorted), len(b_sorted)
    breakpoints = np.union1d(np.arange(1, na + 1) / na, np.arange(1, nb + 1) / nb)
    breakpoints[-1] = 1.0
    lower = np.concatenate(([0.0], breakpoints[:-1]))
    widths = breakpoints - lower
    midpoints = (lower + breakpoints) / 2.0
    ia = np.minimum(np.floor(midpoints * na).astype(np.int64), na - 1)
    ib = np.minimum(np.floor(midpoints * nb).astype(np.int64), nb - 1)
    return float(np.sum(widths * np.abs(a_sorted[ia] - b_sorted[ib])))


def divergences(commitments: Sequence[Commitment]) -> DivergenceReport:
    """
    Data Credit for each worker.

    d_i is the mean over dimensions of the Wasserstein distance between column j of
    commitment i and column j pooled over all other commitments. DC_i = 1 - Phi((d_i - mu) / sigma)
    with population mean/std over workers; every DC is 0.5 when sigma is degenerate.
    """
    k = len(commitments)
    if k < 2:
        raise InvalidArgumentError(f"Need at least 2 commitments, got {k}")
    dim = commitments[0].data.dim
    for i, commitment in enumerate(commitments):
        if commitment.data.dim != dim:
            raise DimensionMismatchError(f"Commitment {i} has dimension {commitment.data.dim}, expected {dim}")

    columns = [c.data.features for c in commitments]
    distances = np.zeros(k)
    for i in range(k):
        others = np.vstack([columns[j] for j in range(k) if j != i])
        per_dim = [wasserstein_1d(columns[i][:, j], others[:, j]) for j in range(dim)]
        distances[i] = float(np.mean(per_dim))

    mu = float(np.mean(distances))
    sigma = float(np.std(distances))
    if sigma < SIGMA_FLOOR:
        dc = np.full(k, 0.5)
    else:
        dc = norm.sf((distances - mu) / sigma)

    logger.debug(f"Commitment divergences: mu={mu:.6f}, sigma={sigma:.6f}")
    return DivergenceReport(distances=distances.tolist(), mu=mu, sigma=sigma, dc=dc.tolist())
