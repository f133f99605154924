from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import DimensionError

# Dense float64 matrix, row-major semantic order
Mat = np.ndarray


class Nonlinearity(str, Enum):
    LINEAR = "linear"
    RELU = "relu"  # mean-subtracted ReLU


class Variant(str, Enum):
    BMVR = "bmvr"
    BACKPROP = "backprop"
    BMVR_DECOUPLED = "bmvr-decoupled"
    BMVR_OFFLINE = "bmvr-offline"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


def _as_matrix(value, ndim: int):
    if value is None:
        return None
    array = np.array(value, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {array.shape}")
    return array


class ScheduleSpec(BaseModel):
    """Learning rate eta0 / (1 + t/t0); constant when t0 is absent"""
    eta0: float = Field(ge=0)
    t0: Optional[float] = Field(default=None, gt=0)

    def value(self, t: int) -> float:
        if self.t0 is None:
            return self.eta0
        return self.eta0 / (1.0 + t / self.t0)


class InitSpec(BaseModel):
    """Weight initialization options"""
    q_scale: float = 1.0
    decoupled: bool = False


class TrainConfig(BaseModel):
    """Hyperparameters of one training run"""
    eta_w1: ScheduleSpec
    eta_w2: ScheduleSpec
    eta_q: ScheduleSpec = Field(default_factory=lambda: ScheduleSpec(eta0=0.0))
    tau: float = Field(default=1.0, gt=0)
    nonlinearity: Nonlinearity = Nonlinearity.LINEAR
    mean_rate: float = Field(default=1e-4, ge=0, lt=1)
    variant: Variant = Variant.BMVR
    seed: int = Field(default=0, ge=0, lt=2**64)
    steps: int = Field(default=0, ge=0)
    k: int = Field(default=4, ge=1)
    init: InitSpec = Field(default_factory=InitSpec)

    @model_validator(mode="after")
    def validate_variant(self):
        if self.variant == Variant.BMVR_OFFLINE and self.nonlinearity != Nonlinearity.LINEAR:
            raise ValueError("bmvr-offline supports the linear network only")
        if self.variant == Variant.BMVR_DECOUPLED and not self.init.decoupled:
            self.init = self.init.model_copy(update={"decoupled": True})
        return self


class ModelState(BaseModel):
    """Trainable weights of one two-layer model"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    W1: Mat  # k x m
    W2: Mat  # n x k
    Q: Mat  # k x k
    R: Optional[Mat] = None  # k x k, decoupled pyramidal-to-interneuron weights
    z_bar: Optional[Mat] = None  # length k, running mean of ReLU activity

    @field_validator("W1", "W2", "Q", "R", mode="before")
    @classmethod
    def validate_matrix(cls, v):
        return _as_matrix(v, 2)

    @field_validator("z_bar", mode="before")
    @classmethod
    def validate_vector(cls, v):
        return _as_matrix(v, 1)

    @model_validator(mode="after")
    def validate_shapes(self):
        k, m = self.W1.shape
        n, k2 = self.W2.shape
        if k2 != k or self.Q.shape != (k, k):
            raise DimensionError(
                f"inconsistent shapes W1 {self.W1.shape}, W2 {self.W2.shape}, Q {self.Q.shape}"
            )
        if self.R is not None and self.R.shape != (k, k):
            raise DimensionError(f"R must be {k}x{k}, got {self.R.shape}")
        if self.z_bar is not None and self.z_bar.shape != (k,):
            raise DimensionError(f"z_bar must have length {k}, got {self.z_bar.shape}")
        return self

    @property
    def m(self) -> int:
        return self.W1.shape[1]

    @property
    def n(self) -> int:
        return self.W2.shape[0]

    @property
    def k(self) -> int:
        return self.W1.shape[0]


class Sample(BaseModel):
    """One (input, target) pair"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: Mat
    y: Mat

    @field_validator("x", "y", mode="before")
    @classmethod
    def validate_vector(cls, v):
        return _as_matrix(v, 1)


class StepIntermediates(BaseModel):
    """Quantities computed inside a single update step"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: Mat  # hidden activity
    a: Mat  # apical current W2^T y
    n_vec: Mat  # interneuron activity
    teaching: Mat  # a - Q n
    y_hat: Optional[Mat] = None
    epsilon: Optional[Mat] = None


class MetricRecord(BaseModel):
    """Evaluation of one run at one step"""
    step: int = Field(ge=0)
    objective: float = Field(ge=0)
    upper_bound_objective: Optional[float] = None
    constraint_gap: Optional[float] = Field(default=None, ge=0)
    train_accuracy: Optional[float] = Field(default=None, ge=0, le=1)
    test_accuracy: Optional[float] = Field(default=None, ge=0, le=1)


class MetricRow(BaseModel):
    """One CSV row: metrics aggregated over repeats"""
    step: int
    objective_mean: float
    objective_std: float
    upper_bound_mean: Optional[float] = None
    constraint_gap_mean: Optional[float] = None
    train_acc_mean: Optional[float] = None
    test_acc_mean: Optional[float] = None


class MetricLog(BaseModel):
    """Per-run records and their mean/std aggregation"""
    label: str = ""
    rows: List[MetricRow] = Field(default_factory=list)
    runs: List[List[MetricRecord]] = Field(default_factory=list)


class CorrelationStats(BaseModel):
    """Empirical second moments of a dataset"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    Cxx: Mat  # m x m
    Cxy: Mat  # m x n
    Cyy: Mat  # n x n
    T: int = Field(ge=1)

    @property
    def Cyx(self) -> Mat:
        return self.Cxy.T


class OracleSolution(BaseModel):
    """Closed-form rank-k optimum of the linear objective"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    optimal_loss: float = Field(ge=0)
    M_eigenvalues: Mat  # descending
    W1_opt: Mat  # k x m
    W2_opt: Mat  # n x k
    rank_ok: bool


class TeachingSignalReport(BaseModel):
    """Agreement between a - Qn and W2^T (y - y_tilde)"""
    mean_rel_err: float = Field(ge=0)
    cosine_mean: float = Field(ge=-1, le=1)
    samples_used: int = Field(ge=0)


class Dataset(BaseModel):
    """Paired samples stored column-wise"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    X: Mat  # m x T
    Y: Mat  # n x T
    split: Split = Split.TRAIN

    @field_validator("X", "Y", mode="before")
    @classmethod
    def validate_matrix(cls, v):
        return _as_matrix(v, 2)

    @model_validator(mode="after")
    def validate_columns(self):
        if self.X.shape[1] != self.Y.shape[1]:
            raise DimensionError(
                f"X has {self.X.shape[1]} samples but Y has {self.Y.shape[1]}"
            )
        if self.X.shape[1] < 1:
            raise DimensionError("dataset must contain at least one sample")
        return self

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.X.shape[1]

    def sample(self, t: int) -> Sample:
        return Sample.model_construct(x=self.X[:, t], y=self.Y[:, t])


class RunSpec(BaseModel):
    """Everything needed to execute (and repeat) one training run"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: TrainConfig
    train: Dataset
    eval: Dataset
    eval_every: int = Field(default=1000, ge=1)
    log_path: Optional[str] = None
    checkpoint_path: Optional[str] = None
    repeats: int = Field(default=1, ge=1)
    eval_subsample: Optional[int] = Field(default=None, ge=1)
    label: str = ""


class RunResult(BaseModel):
    """MetricLog plus the final model of every repeat"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    log: MetricLog
    final_states: List[ModelState]


class Subcommand(str, Enum):
    TRAIN = "train"
    COMPARE = "compare"
    DIAGNOSE = "diagnose"
    ORACLE = "oracle"
    PLOT = "plot"


class CommandSpec(BaseModel):
    """Parsed CLI invocation"""
    subcommand: Subcommand
    flags: Dict[str, object] = Field(default_factory=dict)


# ---------------------------------------------------------------------------
# HTTP request/response models
# ---------------------------------------------------------------------------

class SynthDatasetRequest(BaseModel):
    """Synthetic low-rank regression dataset description"""
    m: int = Field(default=20, ge=1, le=2000)
    n: int = Field(default=10, ge=1, le=2000)
    k_true: int = Field(default=4, ge=1)
    T: int = Field(default=2000, ge=1, le=200000)
    noise_sigma: float = Field(default=0.1, ge=0)
    seed: int = Field(default=1, ge=0)

    @model_validator(mode="after")
    def validate_rank(self):
        if self.k_true > min(self.m, self.n):
            raise ValueError("k_true must not exceed min(m, n)")
        return self


class OracleRequest(BaseModel):
    dataset: SynthDatasetRequest = Field(default_factory=SynthDatasetRequest)
    k: int = Field(default=4, ge=1)
    ridge: Optional[float] = Field(default=None, ge=0)


class OracleResponse(BaseModel):
    optimal_loss: float
    M_eigenvalues: List[float]
    rank_ok: bool
    trace_cyy: float


class TrainRequest(BaseModel):
    dataset: SynthDatasetRequest = Field(default_factory=SynthDatasetRequest)
    config: Optional[TrainConfig] = None
    preset: Optional[str] = None
    variant: Optional[Variant] = None
    steps: Optional[int] = Field(default=None, ge=0, le=200000)
    eval_every: int = Field(default=1000, ge=1)
    repeats: int = Field(default=1, ge=1, le=10)


class DiagnosticsSummary(BaseModel):
    objective: float
    upper_bound_objective: float
    tightness_ratio: float
    constraint_gap: float
    q_min_sv: float
    teaching_signal: TeachingSignalReport
    oracle_loss: float


class TrainResponse(BaseModel):
    rows: List[MetricRow]
    oracle_loss: float
    diagnostics: List[DiagnosticsSummary]
