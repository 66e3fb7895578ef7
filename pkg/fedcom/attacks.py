"""
Byzantine worker behaviours: label flipping and back-gradient data poisoning,
Gaussian and Krum-attack model poisoning, and honest/fake commitments.
"""

import logging
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial.distance import cdist

from fedcom.aggregation import krum_scores
from fedcom.commitment import Commitment, build_commitment
from fedcom.data import Dataset, min_max_bounds
from fedcom.errors import DimensionMismatchError, EmptyInputError, InvalidArgumentError
from fedcom.model import ModelArch, ParameterVector, input_gradient

logger = logging.getLogger(__name__)


class AttackKind(str, Enum):
    """Byzantine behaviour of the attacking workers."""

    NONE = "none"
    LABEL_FLIP = "label_flip"
    BACK_GRADIENT = "back_gradient"
    GAUSSIAN = "gaussian"
    KRUM_ATTACK = "krum_attack"

    @property
    def poisons_data(self) -> bool:
        return self in (AttackKind.LABEL_FLIP, AttackKind.BACK_GRADIENT)

    @property
    def poisons_model(self) -> bool:
        return self in (AttackKind.GAUSSIAN, AttackKind.KRUM_ATTACK)


class CommitmentStrategy(str, Enum):
    """How a poisoning worker builds its commitment."""

    HC = "hc"  # from the poisoned local data
    FC = "fc"  # from the clean local data


class AttackSpec(BaseModel):
    """Attack configuration shared by all Byzantine workers of a run."""

    model_config = ConfigDict(extra="forbid")

    kind: AttackKind = AttackKind.NONE
    byzantine_fraction: float = Field(0.0, ge=0.0, lt=0.5)
    commitment_strategy: CommitmentStrategy = CommitmentStrategy.HC
    gaussian_sigma: float = Field(1.0, gt=0)
    poison_steps: int = Field(20, ge=1)
    poison_step_size: float = Field(10.0, ge=0)
    surrogate_epochs: int = Field(10, ge=1)
    surrogate_learning_rate: float = Field(0.01, gt=0)
    lambda_max: float = Field(1.0, gt=0)
    # lambda_max multiplies the bound derived from the benign updates instead of being absolute
    relative_lambda: bool = True
    max_halvings: int = Field(30, ge=0)
    lambda_refinements: int = Field(6, ge=0)
    jitter_scale: float = Field(1e-3, ge=0)

    @field_validator("kind", "commitment_strategy", mode="before")
    @classmethod
    def _lowercase(cls, value):
        return value.strip().lower() if isinstance(value, str) else value

    @model_validator(mode="after")
    def _model_poisoning_fakes_commitment(self) -> "AttackSpec":
        # Model poisoners have no data behind their models, so their commitment is always fake.
        if self.kind.poisons_model:
            self.commitment_strategy = CommitmentStrategy.FC
        return self


class KrumAttackResult(BaseModel):
    """Crafted models plus the step size the search settled on."""

    model_config = ConfigDict(frozen=True)

    updates: List[ParameterVector]
    lam: float
    selected: bool


def label_flip(dataset: Dataset) -> Dataset:
    """Rotate every label c to (c + 1) mod C; features are untouched."""
    return dataset.with_labels((dataset.labels + 1) % dataset.class_count)


def back_gradient_poison(
    dataset: Dataset,
    surrogate: ParameterVector,
    steps: int,
    step_size: float,
    bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Dataset:
    """
    Push every sample uphill on the surrogate's loss while keeping its label.

    Each step is x += step_size * d(loss)/dx on the sample's own loss, clamped back into
    bounds (default: per-dimension min/max of the given data) after every step.
    """
    if steps < 1:
        raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
    if step_size < 0:
        raise InvalidArgumentError(f"step_size must be >= 0, got {step_size}")
    if dataset.dim != surrogate.arch.input_dim:
        raise DimensionMismatchError(f"Surrogate expects {surrogate.arch.input_dim} features, got {dataset.dim}")
    low, high = bounds if bounds is not None else min_max_bounds(dataset)

    features = np.array(dataset.features)
    for _ in range(steps):
        grad = input_gradient(surrogate, dataset.with_features(features))
        features = np.clip(features + step_size * grad, low, high)
    return dataset.with_features(features)


def gaussian_model(arch: ModelArch, sigma: float, seed: int) -> ParameterVector:
    """Pure N(0, sigma^2) noise submitted as a local model."""
    if sigma <= 0:
        raise InvalidArgumentError(f"invalid sigma: must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    return ParameterVector(arch=arch, values=rng.normal(0.0, sigma, size=arch.parameter_count))


def _selected_by_krum(
    crafted: ParameterVector,
    benign: Sequence[ParameterVector],
    n_attackers: int,
    f: int,
    neighbor_count: Optional[int],
) -> bool:
    scores = krum_scores([crafted] * n_attackers + list(benign), f, neighbor_count)
    return int(np.argmin(scores)) < n_attackers


def krum_lambda_bound(
    benign_updates: Sequence[ParameterVector], global_model: ParameterVector, n_attackers: int
) -> float:
    """
    Largest lambda worth trying, in the units of the benign updates.

    With m workers, c attackers and P parameters this is
    min_i sum_{l in nearest m - c - 2 benign} ||w_l - w_i|| / ((m - 2c - 1) sqrt(P))
    + max_i ||w_i - global|| / sqrt(P); the first term is dropped when m - 2c - 1 <= 0.
    """
    if not benign_updates:
        raise EmptyInputError("Krum attack needs at least one benign update")
    matrix = np.vstack([u.values for u in benign_updates])
    benign, params = matrix.shape
    total = benign + n_attackers
    root = np.sqrt(params)

    bound = float(np.max(np.linalg.norm(matrix - global_model.values, axis=1))) / root
    neighbours = min(total - n_attackers - 2, benign - 1)
    denominator = total - 2 * n_attackers - 1
    if neighbours >= 1 and denominator > 0:
        distances = cdist(matrix, matrix)
        np.fill_diagonal(distances, np.inf)
        closest = np.sort(distances, axis=1)[:, :neighbours].sum(axis=1)
        bound += float(np.min(closest)) / (denominator * root)
    return bound


def krum_attack(
    benign_updates: Sequence[ParameterVector],
    global_model: ParameterVector,
    f: int,
    n_attackers: int,
    lambda_max: float,
    seed: int = 0,
    neighbor_count: Optional[int] = None,
    max_halvings: int = 30,
    jitter_scale: float = 1e-3,
    refinements: int = 0,
) -> KrumAttackResult:
    """
    Craft colluding models that Krum selects but that point against the benign direction.

    The crafted model is global - lam * sign(mean(benign) - global); lam is halved from
    lambda_max until Krum over crafted copies plus benign updates picks a crafted copy.
    `refinements` bisection steps then search between that lam and the last rejected one,
    keeping only values Krum still selects. Each attacker adds N(0, (lam * jitter_scale)^2)
    noise so the copies differ.
    """
    if not benign_updates:
        raise EmptyInputError("Krum attack needs at least one benign update")
    if n_attackers < 1:
        raise InvalidArgumentError(f"n_attackers must be >= 1, got {n_attackers}")
    if lambda_max <= 0:
        raise InvalidArgumentError(f"lambda_max must be positive, got {lambda_max}")

    benign_mean = np.mean(np.vstack([u.values for u in benign_updates]), axis=0)
    direction = np.sign(benign_mean - global_model.values)

    def craft(lam: float) -> ParameterVector:
        return global_model.with_values(global_model.values - lam * direction)

    lam = lambda_max
    selected = False
    for attempt in range(max_halvings + 1):
        lam = lambda_max / (2.0**attempt)
        crafted = craft(lam)
        if _selected_by_krum(crafted, benign_updates, n_attackers, f, neighbor_count):
            selected = True
            break

    if selected and lam < lambda_max:
        low, high = lam, 2.0 * lam
        for _ in range(refinements):
            middle = 0.5 * (low + high)
            if _selected_by_krum(craft(middle), benign_updates, n_attackers, f, neighbor_count):
                low = middle
            else:
                high = middle
        lam = low
        crafted = craft(lam)

    assert not selected or _selected_by_krum(crafted, benign_updates, n_attackers, f, neighbor_count)
    logger.debug(f"Krum attack settled on lambda={lam:.3e} (selected={selected})")

    rng = np.random.default_rng(seed)
    updates = [
        crafted.with_values(crafted.values + rng.normal(0.0, lam * jitter_scale, size=len(crafted.values)))
        for _ in range(n_attackers)
    ]
    return KrumAttackResult(updates=updates, lam=lam, selected=selected)


def make_commitment(strategy: CommitmentStrategy, poisoned: Dataset, clean: Dataset, m: int) -> Commitment:
    """Honest commitment over the poisoned data, or fake commitment over the clean data."""
    source = poisoned if strategy == CommitmentStrategy.HC else clean
    if len(source) == 0:
        raise EmptyInputError(f"Cannot build a {strategy.value.upper()} commitment from an empty dataset")
    return build_commitment(source, m)
