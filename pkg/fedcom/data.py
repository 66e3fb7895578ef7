"""
Datasets, CSV ingestion, synthetic data and Non-IID partitioning.
"""

import logging
import os
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fedcom.errors import (
    EmptyInputError,
    InfeasiblePartitionError,
    InvalidArgumentError,
    MissingColumnError,
    ParseError,
)

logger = logging.getLogger(__name__)

ColumnRef = Union[str, int]


class Dataset(BaseModel):
    """Feature matrix with integer labels in [0, class_count)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: np.ndarray
    labels: np.ndarray
    class_count: int = Field(..., ge=2)

    @field_validator("features", mode="before")
    @classmethod
    def _as_feature_matrix(cls, value):
        array = np.array(value, dtype=np.float64)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2:
            raise ValueError(f"features must be a 2-D matrix, got shape {array.shape}")
        array.setflags(write=False)
        return array

    @field_validator("labels", mode="before")
    @classmethod
    def _as_label_vector(cls, value):
        array = np.array(value, dtype=np.int64).reshape(-1)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_invariants(self) -> "Dataset":
        if len(self.labels) != self.features.shape[0]:
            raise ValueError(f"{len(self.labels)} labels for {self.features.shape[0]} feature rows")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or Inf")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        return self

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """Rows at the given indices, in the given order."""
        index = np.asarray(indices, dtype=np.int64)
        return Dataset(features=self.features[index], labels=self.labels[index], class_count=self.class_count)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(features=self.features, labels=labels, class_count=self.class_count)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features=features, labels=self.labels, class_count=self.class_count)

    def label_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)


class PartitionSpec(BaseModel):
    """Parameters of the Dirichlet Non-IID split."""

    model_config = ConfigDict(extra="forbid")

    worker_count: int = Field(20, ge=2)
    dirichlet_alpha: float = Field(100.0, gt=0)
    size_imbalance: float = Field(1.0, gt=0)
    min_rows: int = Field(1, ge=1)
    seed: int = 0


def concatenate(datasets: Sequence[Dataset]) -> Dataset:
    """Stack datasets that share dimension and class count."""
    if not datasets:
        raise EmptyInputError("Cannot concatenate an empty list of datasets")
    class_count = max(ds.class_count for ds in datasets)
    return Dataset(
        features=np.vstack([ds.features for ds in datasets]),
        labels=np.concatenate([ds.labels for ds in datasets]),
        class_count=class_count,
    )


def _apportion(total: int, weights: np.ndarray) -> np.ndarray:
    """Split an integer total proportionally to weights (largest remainder)."""
    weights = np.asarray(weights, dtype=np.float64)
    if total <= 0 or weights.sum() <= 0:
        return np.zeros(len(weights), dtype=np.int64)
    raw = total * weights / weights.sum()
    counts = np.floor(raw).astype(np.int64)
    remainder = int(total - counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def generate_blobs(
    class_count: int, per_class: int, dim: int, separation: float, seed: int, noise_scale: float = 1.0
) -> Dataset:
    """
    Draw Gaussian blobs, one per class, with class means at mutual distance >= separation.

    Args:
        class_count: Number of classes (>= 2)
        per_class: Samples drawn for each class
        dim: Feature dimension
        separation: Minimum distance between any two class means
        seed: Random seed
        noise_scale: Standard deviation of every blob

    Returns:
        Dataset with per_class * class_count rows, grouped by class
    """
    if class_count < 2 or per_class < 1 or dim < 1:
        raise InvalidArgumentError(
            f"Invalid blob sizes: class_count={class_count}, per_class={per_class}, dim={dim}"
        )
    if separation <= 0 or noise_scale <= 0:
        raise InvalidArgumentError(f"separation and noise_scale must be positive, got {separation}, {noise_scale}")

    rng = np.random.default_rng(seed)
    if dim >= class_count:
        # Scaled simplex corners are pairwise exactly `separation` apart; a random rotation keeps that.
        means = np.zeros((class_count, dim))
        means[np.arange(class_count), np.arange(class_count)] = separation / np.sqrt(2.0)
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        rotation = q * np.sign(np.diag(r))
        means = means @ rotation
    else:
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        means = np.outer(np.arange(class_count) * separation, direction)

    features = np.vstack(
        [means[c] + noise_scale * rng.standard_normal((per_class, dim)) for c in range(class_count)]
    )
    labels = np.repeat(np.arange(class_count), per_class)
    return Dataset(features=features, labels=labels, class_count=class_count)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _resolve_column(columns: List[str], ref: ColumnRef, has_header: bool) -> int:
    if isinstance(ref, str) and ref.lstrip("-").isdigit() and not (has_header and ref in columns):
        ref = int(ref)
    if isinstance(ref, int):
        index = int(ref)
        if index < 0:
            index += len(columns)
        if not 0 <= index < len(columns):
            raise MissingColumnError(f"Column index {ref} out of range for {len(columns)} columns")
        return index
    if ref not in columns:
        raise MissingColumnError(f"Column '{ref}' not found. Available columns: {columns}")
    return columns.index(ref)


def load_csv(
    path: str,
    label_column: ColumnRef = -1,
    group_column: Optional[ColumnRef] = None,
    has_header: Optional[bool] = None,
    class_count: Optional[int] = None,
) -> Tuple[Dataset, Optional[np.ndarray]]:
    """
    Load a comma-separated file into a Dataset.

    Every column other than the label and group columns is a feature. Row numbers in
    errors count data rows from 1, excluding the header.

    Args:
        path: CSV file path
        label_column: Label column name or index
        group_column: Optional group (e.g. user id) column name or index
        has_header: Whether the first line is a header; detected when None
        class_count: Override for the number of classes (default max label + 1)

    Returns:
        Tuple of (dataset, group ids or None)
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"CSV file does not exist: {path}")

    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"Empty CSV file: {path}") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"Malformed CSV file {path}: {e}") from e

    first_row = [str(cell).strip() for cell in raw.iloc[0]]
    if has_header is None:
        named_ref = isinstance(label_column, str) and not label_column.lstrip("-").isdigit()
        has_header = named_ref or not all(_is_number(cell) for cell in first_row)

    if has_header:
        columns = first_row
        body = raw.iloc[1:].reset_index(drop=True)
    else:
        columns = [str(i) for i in range(raw.shape[1])]
        body = raw
    body.columns = list(range(len(columns)))

    if body.empty:
        raise ParseError(f"CSV file has no data rows: {path}")

    label_index = _resolve_column(columns, label_column, has_header)
    group_index = _resolve_column(columns, group_column, has_header) if group_column is not None else None
    feature_indices = [i for i in range(len(columns)) if i not in (label_index, group_index)]
    if not feature_indices:
        raise MissingColumnError(f"No feature columns left in {path}")

    features = np.empty((len(body), len(feature_indices)))
    for out_col, col in enumerate(feature_indices):
        text = body[col].str.strip()
        values = pd.to_numeric(text, errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.argmax(bad))
            raise ParseError(f"Non-numeric feature value '{text.iloc[row]}'", row=row + 1, column=columns[col])
        features[:, out_col] = values

    label_text = body[label_index].str.strip()
    label_values = pd.to_numeric(label_text, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(label_values) | (label_values != np.round(label_values)) | (label_values < 0)
    if bad.any():
        row = int(np.argmax(bad))
        raise ParseError(f"Label '{label_text.iloc[row]}' is not a non-negative integer", row=row + 1,
                         column=columns[label_index])
    labels = label_values.astype(np.int64)

    inferred = max(int(labels.max()) + 1, 2)
    dataset = Dataset(features=features, labels=labels, class_count=class_count or inferred)

    groups = body[group_index].str.strip().to_numpy() if group_index is not None else None
    logger.info(f"Loaded {len(dataset)} rows x {dataset.dim} features from {path}")
    return dataset, groups


def write_csv(dataset: Dataset, path: str) -> None:
    """Write a dataset as CSV with a header and the label in the last column."""
    output_dir = os.path.dirname(path)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    frame = pd.DataFrame(dataset.features, columns=[f"x{j}" for j in range(dataset.dim)])
    frame["label"] = dataset.labels
    frame.to_csv(path, index=False)


def min_max_bounds(dataset: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Per-dimension (min, max) of the features."""
    if len(dataset) == 0:
        raise EmptyInputError("Cannot compute bounds of an empty dataset")
    return dataset.features.min(axis=0), dataset.features.max(axis=0)


def scale_min_max(dataset: Dataset, low: np.ndarray, high: np.ndarray) -> Dataset:
    """Map features to [0, 1] using precomputed bounds (constant dimensions map to 0)."""
    span = np.where(high > low, high - low, 1.0)
    return dataset.with_features((dataset.features - low) / span)


def partition_dirichlet(dataset: Dataset, spec: PartitionSpec) -> List[Dataset]:
    """
    Split a dataset among workers with Dirichlet class skew and log-uniform size skew.

    Each worker draws class proportions from Dirichlet(alpha * 1_C) and a target size
    scaled by a factor in [1/size_imbalance, size_imbalance]. Every class is then split
    across workers in proportion to (worker proportion x worker size), and workers below
    spec.min_rows are topped up from the largest worker.
    """
    n = len(dataset)
    k = spec.worker_count
    if n == 0:
        raise EmptyInputError("Cannot partition an empty dataset")
    if n < k * spec.min_rows:
        raise InfeasiblePartitionError(f"Cannot give {k} workers {spec.min_rows} of {n} samples each")

    rng = np.random.default_rng(spec.seed)
    class_count = dataset.class_count

    spread = abs(np.log(spec.size_imbalance))
    factors = np.exp(rng.uniform(-spread, spread, size=k))
    sizes = factors / factors.sum()
    proportions = rng.dirichlet(np.full(class_count, spec.dirichlet_alpha), size=k)

    assigned: List[List[int]] = [[] for _ in range(k)]
    for c in range(class_count):
        pool = rng.permutation(np.flatnonzero(dataset.labels == c))
        shares = proportions[:, c] * sizes
        # Tiny alphas can underflow every share of a class to zero
        if not shares.sum() > 0:
            shares = sizes
        counts = _apportion(len(pool), shares)
        for worker, rows in enumerate(np.split(pool, np.cumsum(counts)[:-1])):
            assigned[worker].extend(rows.tolist())

    lengths = np.array([len(rows) for rows in assigned])
    while lengths.min() < spec.min_rows:
        small, large = int(np.argmin(lengths)), int(np.argmax(lengths))
        moved = int(min(spec.min_rows - lengths[small], lengths[large] - spec.min_rows))
        assigned[small].extend(assigned[large][-moved:])
        del assigned[large][-moved:]
        lengths[small] += moved
        lengths[large] -= moved

    partitions = [dataset.subset(sorted(rows)) for rows in assigned]
    logger.debug(f"Dirichlet partition sizes: {[len(p) for p in partitions]}")
    return partitions


def partition_by_group(dataset: Dataset, groups: Sequence, k: int, seed: int) -> List[Dataset]:
    """Pick k distinct groups uniformly without replacement; worker i gets every row of group i."""
    groups = np.asarray(groups)
    if len(groups) != len(dataset):
        raise InvalidArgumentError(f"{len(groups)} group ids for {len(dataset)} rows")
    distinct = np.unique(groups)
    if len(distinct) < k:
        raise InfeasiblePartitionError(f"Need {k} distinct groups, found {len(distinct)}")

    rng = np.random.default_rng(seed)
    chosen = distinct[rng.choice(len(distinct), size=k, replace=False)]
    return [dataset.subset(np.flatnonzero(groups == group)) for group in chosen]


def train_test_split(dataset: Dataset, test_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Stratified split into (train, test).

    The test size is round(n * test_fraction), apportioned over classes by their counts.
    Both parts keep the original row order.
    """
    train_rows, test_rows = split_indices(dataset, test_fraction, seed)
    return dataset.subset(train_rows), dataset.subset(test_rows)


def split_indices(dataset: Dataset, test_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row indices (train, test) of the stratified split used by train_test_split."""
    if not 0 < test_fraction < 1:
        raise InvalidArgumentError(f"invalid fraction: test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    if n < 2:
        raise InvalidArgumentError(f"Need at least 2 rows to split, got {n}")

    n_test = min(max(int(np.floor(n * test_fraction + 0.5)), 1), n - 1)
    histogram = dataset.label_histogram()
    per_class = np.minimum(_apportion(n_test, histogram), histogram)

    rng = np.random.default_rng(seed)
    test_rows: List[int] = []
    for c in range(dataset.class_count):
        rows = rng.permutation(np.flatnonzero(dataset.labels == c))
        test_rows.extend(rows[: per_class[c]].tolist())

    is_test = np.zeros(n, dtype=bool)
    is_test[test_rows] = True
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)
