"""
State management for the FedCom simulation graph.
"""

import math
from enum import Enum
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fedcom.aggregation import AggregationRule, CreditReport
from fedcom.attacks import AttackKind, AttackSpec
from fedcom.commitment import Commitment, DivergenceReport
from fedcom.data import Dataset
from fedcom.model import ModelArch, ModelKind, ParameterVector, TrainConfig


class SeedStream(int, Enum):
    """Independent random streams derived from the run seed."""

    DATA = 1
    SPLIT = 2
    PARTITION = 3
    BYZANTINE = 4
    INIT = 5
    TRAIN = 6
    ATTACK = 7
    SURROGATE = 8


def derive_seed(seed: int, stream: SeedStream, *keys: int) -> int:
    """
    Deterministic child seed for (run seed, stream, keys...).

    The whole seed is used: its sign, word count and 32-bit words lead the entropy,
    so seeds that differ only above bit 31 still get different children.
    """
    magnitude = abs(int(seed))
    words = []
    while True:
        words.append(magnitude & 0xFFFFFFFF)
        magnitude >>= 32
        if not magnitude:
            break
    entropy = [int(int(seed) < 0), len(words), *words, int(stream), *(int(key) for key in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


class DataSourceKind(str, Enum):
    """Where the run's data comes from."""

    SYNTHETIC = "synthetic"
    CSV = "csv"


class PartitionMethod(str, Enum):
    """How training rows are assigned to workers."""

    DIRICHLET = "dirichlet"
    GROUP = "group"


class CreditMode(str, Enum):
    """Which FedCom credits feed the median gate."""

    FULL = "full"
    TRAINING_ONLY = "training_only"


class DataSource(BaseModel):
    """Synthetic blobs or a CSV file (optionally with a separate test file)."""

    model_config = ConfigDict(extra="forbid")

    kind: DataSourceKind = DataSourceKind.SYNTHETIC
    class_count: int = Field(3, ge=2)
    per_class: int = Field(800, ge=1)
    dim: int = Field(10, ge=1)
    separation: float = Field(4.0, gt=0)
    noise_scale: float = Field(1.0, gt=0)
    csv_path: Optional[str] = None
    test_csv_path: Optional[str] = None
    label_column: Union[int, str] = -1
    group_column: Optional[Union[int, str]] = None
    # None detects a header: a named label column or any non-numeric cell in the first row
    has_header: Optional[bool] = None

    @model_validator(mode="after")
    def _csv_needs_path(self) -> "DataSource":
        if self.kind == DataSourceKind.CSV and not self.csv_path:
            raise ValueError("csv_path is required when kind is 'csv'")
        return self


class PartitionSettings(BaseModel):
    """Non-IID split settings; worker count and seed come from the run."""

    model_config = ConfigDict(extra="forbid")

    method: PartitionMethod = PartitionMethod.DIRICHLET
    dirichlet_alpha: float = Field(100.0, gt=0)
    size_imbalance: float = Field(1.0, gt=0)


class ModelSettings(BaseModel):
    """Architecture choice; dimensions are filled in from the data."""

    model_config = ConfigDict(extra="forbid")

    kind: ModelKind = ModelKind.LR
    hidden_dim: int = Field(150, ge=1)

    @field_validator("kind", mode="before")
    @classmethod
    def _lowercase(cls, value):
        return value.strip().lower() if isinstance(value, str) else value


class RunConfig(BaseModel):
    """Complete configuration of one simulation run."""

    model_config = ConfigDict(extra="forbid")

    source: DataSource = Field(default_factory=DataSource)
    partition: PartitionSettings = Field(default_factory=PartitionSettings)
    model: ModelSettings = Field(default_factory=ModelSettings)
    train: TrainConfig = Field(default_factory=TrainConfig)
    attack: AttackSpec = Field(default_factory=AttackSpec)
    rule: AggregationRule = AggregationRule.FEDCOM
    rounds: int = Field(30, ge=1)
    worker_count: int = Field(20, ge=2)
    krum_f: Optional[int] = Field(None, ge=0)
    krum_neighbors: Optional[int] = Field(None, ge=1)
    commitment_m: int = 5
    fedcom_credit: CreditMode = CreditMode.FULL
    test_fraction: float = Field(0.2, gt=0, lt=1)
    normalize: bool = False
    seed: int = 0
    max_workers: int = Field(1, ge=1)
    output_dir: Optional[str] = None
    dump_commitments: bool = False

    @field_validator("rule", mode="before")
    @classmethod
    def _lowercase_rule(cls, value):
        return value.strip().lower().replace("-", "") if isinstance(value, str) else value

    @model_validator(mode="after")
    def _rule_parameters(self) -> "RunConfig":
        if (self.rule == AggregationRule.FEDCOM or self.dump_commitments) and self.commitment_m < 2:
            raise ValueError(f"commitment_m must be >= 2 for commitments, got {self.commitment_m}")
        if self.rule in (AggregationRule.KRUM, AggregationRule.MULTIKRUM):
            f = self.assumed_byzantine
            if self.worker_count < f + 2:
                raise ValueError(f"krum_f={f} needs at least {f + 2} workers, got {self.worker_count}")
        return self

    @property
    def byzantine_count(self) -> int:
        if self.attack.kind == AttackKind.NONE:
            return 0
        return int(math.floor(self.worker_count * self.attack.byzantine_fraction + 1e-9))

    @property
    def assumed_byzantine(self) -> int:
        """Krum's f: the configured bound, else the true number of Byzantine workers."""
        return self.krum_f if self.krum_f is not None else self.byzantine_count


class RoundRecord(BaseModel):
    """Metrics of one training round."""

    round: int
    benign_accuracy: float = Field(..., ge=0, le=1)
    poison_accuracy: Optional[float] = Field(None, ge=0, le=1)
    credits: Optional[CreditReport] = None
    selected: Optional[List[int]] = None
    wall_time: float = 0.0


class RunReport(BaseModel):
    """Everything a run produced."""

    config: RunConfig
    records: List[RoundRecord] = Field(default_factory=list)
    byzantine_workers: List[int] = Field(default_factory=list)
    worker_sizes: List[int] = Field(default_factory=list)
    divergence: Optional[DivergenceReport] = None
    commitments: List[Commitment] = Field(default_factory=list, exclude=True)
    total_wall_time: float = 0.0


class SimulationState(BaseModel):
    """Complete state for the FedCom workflow."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    run_config: RunConfig
    arch: Optional[ModelArch] = None
    train_data: Optional[Dataset] = None
    test_data: Optional[Dataset] = None
    poison_eval: Optional[Dataset] = None
    clean_partitions: List[Dataset] = Field(default_factory=list)
    local_data: List[Dataset] = Field(default_factory=list)
    byzantine: List[int] = Field(default_factory=list)
    commitments: List[Commitment] = Field(default_factory=list)
    divergence: Optional[DivergenceReport] = None
    global_model: Optional[ParameterVector] = None
    updates: List[ParameterVector] = Field(default_factory=list)
    last_credits: Optional[CreditReport] = None
    last_selection: Optional[List[int]] = None
    round: int = 0
    round_started_at: Optional[float] = None
    started_at: Optional[float] = None
    records: List[RoundRecord] = Field(default_factory=list)
    report: Optional[RunReport] = None
    error: Optional[str] = None

    @property
    def worker_sizes(self) -> List[int]:
        return [len(ds) for ds in self.local_data]
