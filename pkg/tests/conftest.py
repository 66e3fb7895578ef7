"""
Shared fixtures for the FedCom test suite.
"""

import numpy as np
import pytest

from fedcom.data import Dataset, generate_blobs
from fedcom.model import ModelArch, ParameterVector

SMALL_ARCH = ModelArch(input_dim=1, class_count=2)  # four parameters


def vector(*values: float) -> ParameterVector:
    """Four-parameter update with the given leading values, zero-padded."""
    padded = np.zeros(SMALL_ARCH.parameter_count)
    padded[: len(values)] = values
    return ParameterVector(arch=SMALL_ARCH, values=padded)


@pytest.fixture
def blobs() -> Dataset:
    return generate_blobs(class_count=3, per_class=100, dim=5, separation=6.0, seed=7)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
