"""
From-scratch classifiers (multiclass logistic regression, one-hidden-layer MLP)
with analytic gradients and mini-batch Adam training.
"""

import logging
from enum import Enum
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import expit, log_softmax, softmax

from fedcom.data import Dataset
from fedcom.errors import DimensionMismatchError, EmptyInputError

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12


class ModelKind(str, Enum):
    """Supported architectures."""

    LR = "lr"
    MLP = "mlp"


class ModelArch(BaseModel):
    """Architecture descriptor; the parameter layout follows from these fields alone."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ModelKind = ModelKind.LR
    input_dim: int = Field(..., ge=1)
    hidden_dim: int = Field(150, ge=1)
    class_count: int = Field(..., ge=2)

    @property
    def parameter_count(self) -> int:
        d, h, c = self.input_dim, self.hidden_dim, self.class_count
        if self.kind == ModelKind.LR:
            return d * c + c
        return d * h + h + h * c + c

    def shapes(self) -> Dict[str, tuple]:
        """Named blocks of the flat parameter vector, in storage order."""
        d, h, c = self.input_dim, self.hidden_dim, self.class_count
        if self.kind == ModelKind.LR:
            return {"W": (d, c), "b": (c,)}
        return {"W1": (d, h), "b1": (h,), "W2": (h, c), "b2": (c,)}


class ParameterVector(BaseModel):
    """Flat, immutable parameter vector of a model."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    arch: ModelArch
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_vector(cls, value):
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_length(self) -> "ParameterVector":
        if len(self.values) != self.arch.parameter_count:
            raise ValueError(f"Expected {self.arch.parameter_count} parameters, got {len(self.values)}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Parameter vector contains NaN or Inf")
        return self

    def with_values(self, values: np.ndarray) -> "ParameterVector":
        return ParameterVector(arch=self.arch, values=values)

    def unpack(self) -> Dict[str, np.ndarray]:
        """Views of the named parameter blocks."""
        return _unpack(self.arch, self.values)


class TrainConfig(BaseModel):
    """Local training hyperparameters (Adam defaults)."""

    model_config = ConfigDict(extra="forbid")

    local_epochs: int = Field(1, ge=0)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    adam_beta1: float = Field(0.9, gt=0, lt=1)
    adam_beta2: float = Field(0.999, gt=0, lt=1)
    adam_epsilon: float = Field(1e-8, gt=0)
    seed: int = 0


def _unpack(arch: ModelArch, flat: np.ndarray) -> Dict[str, np.ndarray]:
    blocks = {}
    offset = 0
    for name, shape in arch.shapes().items():
        size = int(np.prod(shape))
        blocks[name] = flat[offset : offset + size].reshape(shape)
        offset += size
    return blocks


def _pack(blocks: Dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([block.reshape(-1) for block in blocks.values()])


def _check_features(arch: ModelArch, features: np.ndarray) -> None:
    if features.ndim != 2 or features.shape[1] != arch.input_dim:
        raise DimensionMismatchError(f"Model expects {arch.input_dim} features, got shape {features.shape}")


def _one_hot(labels: np.ndarray, class_count: int) -> np.ndarray:
    encoded = np.zeros((len(labels), class_count))
    encoded[np.arange(len(labels)), labels] = 1.0
    return encoded


def init_model(arch: ModelArch, seed: int) -> ParameterVector:
    """
    Initial parameters: zeros for LR, Glorot-uniform weights and zero biases for the MLP.
    """
    if arch.kind == ModelKind.LR:
        return ParameterVector(arch=arch, values=np.zeros(arch.parameter_count))

    rng = np.random.default_rng(seed)
    d, h, c = arch.input_dim, arch.hidden_dim, arch.class_count
    limit1 = np.sqrt(6.0 / (d + h))
    limit2 = np.sqrt(6.0 / (h + c))
    blocks = {
        "W1": rng.uniform(-limit1, limit1, size=(d, h)),
        "b1": np.zeros(h),
        "W2": rng.uniform(-limit2, limit2, size=(h, c)),
        "b2": np.zeros(c),
    }
    return ParameterVector(arch=arch, values=_pack(blocks))


def _forward(w: ParameterVector, features: np.ndarray):
    """Return (logits, hidden pre-activation, hidden activation)."""
    blocks = w.unpack()
    if w.arch.kind == ModelKind.LR:
        return features @ blocks["W"] + blocks["b"], None, None
    pre = features @ blocks["W1"] + blocks["b1"]
    hidden = np.maximum(pre, 0.0)
    return hidden @ blocks["W2"] + blocks["b2"], pre, hidden


def predict_proba(w: ParameterVector, features: np.ndarray) -> np.ndarray:
    """
    Class probabilities: softmax rows for LR, independent per-class sigmoids for the MLP.

    Entries are clipped to [PROBABILITY_FLOOR, 1 - PROBABILITY_FLOOR], so they never reach 0 or 1.
    """
    features = np.asarray(features, dtype=np.float64)
    _check_features(w.arch, features)
    logits, _, _ = _forward(w, features)
    if w.arch.kind == ModelKind.LR:
        proba = softmax(logits, axis=1)
    else:
        proba = expit(logits)
    return np.clip(proba, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)


def loss(w: ParameterVector, dataset: Dataset) -> float:
    """Mean cross-entropy (LR) or mean one-vs-all binary cross-entropy summed over classes (MLP)."""
    if len(dataset) == 0:
        raise EmptyInputError("Cannot evaluate loss on an empty dataset")
    _check_features(w.arch, dataset.features)
    logits, _, _ = _forward(w, dataset.features)
    rows = np.arange(len(dataset))
    if w.arch.kind == ModelKind.LR:
        probs = np.exp(log_softmax(logits, axis=1)[rows, dataset.labels])
        return float(np.mean(-np.log(np.clip(probs, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR))))

    probs = np.clip(expit(logits), PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
    targets = _one_hot(dataset.labels, w.arch.class_count)
    per_sample = -(targets * np.log(probs) + (1.0 - targets) * np.log(1.0 - probs)).sum(axis=1)
    return float(np.mean(per_sample))


def _output_error(w: ParameterVector, logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(per-sample loss)/d(logits); the clamp only bounds the loss value."""
    targets = _one_hot(labels, w.arch.class_count)
    if w.arch.kind == ModelKind.LR:
        return softmax(logits, axis=1) - targets
    return expit(logits) - targets


def gradient(w: ParameterVector, batch: Dataset) -> np.ndarray:
    """Analytic gradient of the mean batch loss, shaped like w.values."""
    if len(batch) == 0:
        raise EmptyInputError("Cannot compute a gradient on an empty batch")
    _check_features(w.arch, batch.features)
    features = batch.features
    logits, pre, hidden = _forward(w, features)
    delta = _output_error(w, logits, batch.labels) / len(batch)

    if w.arch.kind == ModelKind.LR:
        return _pack({"W": features.T @ delta, "b": delta.sum(axis=0)})

    blocks = w.unpack()
    delta_hidden = (delta @ blocks["W2"].T) * (pre > 0)
    return _pack(
        {
            "W1": features.T @ delta_hidden,
            "b1": delta_hidden.sum(axis=0),
            "W2": hidden.T @ delta,
            "b2": delta.sum(axis=0),
        }
    )


def input_gradient(w: ParameterVector, dataset: Dataset) -> np.ndarray:
    """Per-sample gradient of each sample's own loss with respect to its features (n x d)."""
    _check_features(w.arch, dataset.features)
    logits, pre, _ = _forward(w, dataset.features)
    delta = _output_error(w, logits, dataset.labels)
    blocks = w.unpack()
    if w.arch.kind == ModelKind.LR:
        return delta @ blocks["W"].T
    return ((delta @ blocks["W2"].T) * (pre > 0)) @ blocks["W1"].T


class AdamState:
    """First/second moment buffers for one local training session."""

    def __init__(self, size: int, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        self.t += 1
        self.m = cfg.adam_beta1 * self.m + (1.0 - cfg.adam_beta1) * grad
        self.v = cfg.adam_beta2 * self.v + (1.0 - cfg.adam_beta2) * grad**2
        m_hat = self.m / (1.0 - cfg.adam_beta1**self.t)
        v_hat = self.v / (1.0 - cfg.adam_beta2**self.t)
        return params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)


def train_local(w0: ParameterVector, dataset: Dataset, cfg: TrainConfig) -> ParameterVector:
    """
    Mini-batch Adam from w0 for cfg.local_epochs passes.

    Moments start at zero on every call and batches come from a shuffle seeded by cfg.seed,
    so the result depends only on (w0, dataset, cfg).
    """
    if len(dataset) == 0:
        raise EmptyInputError("Cannot train on an empty dataset")
    _check_features(w0.arch, dataset.features)
    if cfg.local_epochs == 0:
        return w0

    rng = np.random.default_rng(cfg.seed)
    optimizer = AdamState(w0.arch.parameter_count, cfg)
    params = np.array(w0.values)
    current = w0
    for _ in range(cfg.local_epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), cfg.batch_size):
            batch = dataset.subset(order[start : start + cfg.batch_size])
            params = optimizer.step(params, gradient(current, batch))
            current = w0.with_values(params)
    return current


def accuracy(w: ParameterVector, dataset: Dataset, proba: Optional[np.ndarray] = None) -> float:
    """
    Fraction of rows whose argmax class equals the label; ties go to the smallest class index.

    Without proba the argmax is taken over the logits, which rank classes like the unclipped
    probabilities and keep saturated classes apart.
    """
    if len(dataset) == 0:
        raise EmptyInputError("Cannot compute accuracy on an empty dataset")
    if proba is None:
        _check_features(w.arch, dataset.features)
        proba, _, _ = _forward(w, dataset.features)
    return float(np.mean(np.argmax(proba, axis=1) == dataset.labels))
