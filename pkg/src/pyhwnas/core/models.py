import math
from dataclasses import (
    asdict,
    dataclass,
    field,
    replace,
)
from pathlib import Path
from typing import (
    Any,
    ClassVar,
    Literal,
    Optional
)

import numpy as np

from ..utils.common import all_finite
from ..utils.constants import NUM_BLOCKS, SKIP_INDEX
from ..utils.exceptions import AdmissibilityError, ErrorCodes
from .autodiff import Tensor




class Serializable:
    def asdict(self) -> dict[str, Any]:
        return asdict(self)

    def asjson(self) -> str:
        import json
        return json.dumps(self.asdict(), default=str)



def _invalid(msg):
    return ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, msg)




# ─────────────── search space ───────────────
@dataclass(frozen=True, slots=True)
class BlockConfig(Serializable):
    expansion: int = 1
    kernel: int = 3
    groups: int = 1
    is_skip: bool = False

    def __post_init__(self):
        if self.is_skip:
            return
        if self.expansion < 1:
            raise _invalid(f"BlockConfig: expansion must be >= 1, got {self.expansion}.")
        if self.kernel not in (3, 5):
            raise _invalid(f"BlockConfig: kernel must be 3 or 5, got {self.kernel}.")
        if self.groups not in (1, 2):
            raise _invalid(f"BlockConfig: groups must be 1 or 2, got {self.groups}.")

    @property
    def name(self) -> str:
        if self.is_skip:
            return "skip"
        return f"e{self.expansion}_k{self.kernel}_g{self.groups}"



@dataclass(frozen=True, slots=True)
class LayerSpec(Serializable):
    in_channels: int
    out_channels: int
    stride: int = 1
    tbs: bool = True

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise _invalid(f"LayerSpec: channel counts must be positive, got {self.in_channels}->{self.out_channels}.")
        if self.stride not in (1, 2):
            raise _invalid(f"LayerSpec: stride must be 1 or 2, got {self.stride}.")

    @property
    def skip_admissible(self) -> bool:
        return self.in_channels == self.out_channels and self.stride == 1



@dataclass(frozen=True, slots=True)
class MacroArch(Serializable):
    preset: str
    stem: LayerSpec
    tbs_layers: tuple[LayerSpec, ...]
    head_channels: int
    num_classes: int
    input_hw: tuple[int, int] = (8, 8)

    def __post_init__(self):
        if not self.tbs_layers:
            raise _invalid("MacroArch: at least one TBS layer is required.")
        if self.num_classes < 2:
            raise _invalid(f"MacroArch: num_classes must be >= 2, got {self.num_classes}.")
        previous = self.stem.out_channels
        for idx, layer in enumerate(self.tbs_layers):
            if not layer.tbs:
                raise _invalid(f"MacroArch: layer {idx} is not marked as a TBS layer.")
            if layer.in_channels != previous:
                raise _invalid(
                    f"MacroArch: layer {idx} expects {layer.in_channels} input channels "
                    f"but the previous layer produces {previous}."
                )
            previous = layer.out_channels

    @property
    def num_layers(self) -> int:
        return len(self.tbs_layers)

    @property
    def input_channels(self) -> int:
        return self.stem.in_channels

    @property
    def last_channels(self) -> int:
        return self.tbs_layers[-1].out_channels

    def admissible_mask(self) -> np.ndarray:
        mask = np.ones((self.num_layers, NUM_BLOCKS), dtype=bool)
        for row, layer in enumerate(self.tbs_layers):
            mask[row, SKIP_INDEX] = layer.skip_admissible
        return mask

    def layer_input_hw(self, input_hw: Optional[tuple[int, int]] = None) -> list[tuple[int, int]]:
        """Spatial size seen by each TBS layer for a given network input size."""
        h, w = input_hw or self.input_hw
        h, w = (h - 1) // self.stem.stride + 1, (w - 1) // self.stem.stride + 1
        sizes = []
        for layer in self.tbs_layers:
            sizes.append((h, w))
            h, w = (h - 1) // layer.stride + 1, (w - 1) // layer.stride + 1
        return sizes




# ─────────────── device and tables ───────────────
@dataclass(frozen=True, slots=True, kw_only=True)
class DeviceModel(Serializable):
    supply_voltage: float = 5.1
    idle_current: float = 0.24
    max_current: float = 0.74
    throughput: float = 1e8
    per_block_overhead: float = 1e-4
    utilization_exponent: float = 0.5

    def __post_init__(self):
        if not all_finite(*self.astuple_values()):
            raise _invalid("DeviceModel: all parameters must be finite.")
        if not 0 < self.idle_current < self.max_current:
            raise _invalid(
                f"DeviceModel: need 0 < idle_current < max_current, got {self.idle_current} and {self.max_current}."
            )
        if self.throughput <= 0:
            raise _invalid(f"DeviceModel: throughput must be positive, got {self.throughput}.")
        if self.supply_voltage <= 0 or self.per_block_overhead < 0 or self.utilization_exponent <= 0:
            raise _invalid("DeviceModel: supply_voltage and utilization_exponent must be positive, overhead >= 0.")

    def astuple_values(self) -> tuple[float, ...]:
        return (
            self.supply_voltage, self.idle_current, self.max_current,
            self.throughput, self.per_block_overhead, self.utilization_exponent,
        )



@dataclass(eq=False)
class CostTable(Serializable):
    """Per-(TBS layer, block) cost; absent (inadmissible) cells hold NaN."""

    metric: Literal["latency", "energy"]
    values: np.ndarray
    unit: str = field(default=None)

    UNITS: ClassVar[dict[str, str]] = {"latency": "s", "energy": "J"}

    def __post_init__(self):
        if self.metric not in self.UNITS:
            raise _invalid(f"CostTable: metric must be 'latency' or 'energy', got {self.metric!r}.")
        self.unit = self.unit or self.UNITS[self.metric]
        if self.unit != self.UNITS[self.metric]:
            raise _invalid(f"CostTable: unit {self.unit!r} does not match metric {self.metric!r}.")
        self.values = np.array(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != NUM_BLOCKS:
            raise _invalid(f"CostTable: values must be [layers x {NUM_BLOCKS}], got shape {self.values.shape}.")
        present = self.values[self.admissible]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise _invalid("CostTable: every present cell must be finite and >= 0.")

    @property
    def admissible(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def num_layers(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def dense(self) -> np.ndarray:
        """Values with absent cells replaced by 0.0, safe to multiply by a mask."""
        return np.where(self.admissible, self.values, 0.0)

    def __eq__(self, other):
        if not isinstance(other, CostTable):
            return NotImplemented
        return (
            self.metric == other.metric
            and self.unit == other.unit
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def __repr__(self):
        return f"CostTable(metric={self.metric!r}, unit={self.unit!r}, shape={self.values.shape})"




# ─────────────── loss ───────────────
@dataclass(frozen=True, slots=True)
class LossKnobs(Serializable):
    alpha: float = 0.0
    beta: float = 1.0
    gamma: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        if not all_finite(self.alpha, self.beta, self.gamma, self.delta):
            raise _invalid(f"LossKnobs: knobs must be finite, got {self}.")
        if self.alpha < 0 or self.gamma < 0:
            raise _invalid(f"LossKnobs: alpha and gamma must be >= 0, got alpha={self.alpha}, gamma={self.gamma}.")
        if self.beta <= 0 or self.delta <= 0:
            raise _invalid(f"LossKnobs: beta and delta must be > 0, got beta={self.beta}, delta={self.delta}.")



@dataclass(slots=True)
class LossBreakdown(Serializable):
    ce: float
    lat: float
    ener: float
    total: float
    knobs: LossKnobs = field(default_factory=LossKnobs)
    loss: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def asdict(self) -> dict[str, Any]:
        return {"ce": self.ce, "lat": self.lat, "ener": self.ener, "total": self.total}




# ─────────────── architecture parameters ───────────────
@dataclass(eq=False)
class Theta:
    """Per-TBS-layer sampling logits; inadmissible cells are pinned to ``-inf``."""

    logits: Tensor

    def __post_init__(self):
        if not isinstance(self.logits, Tensor):
            self.logits = Tensor(self.logits, requires_grad=True)
        if self.logits.ndim != 2 or self.logits.shape[1] != NUM_BLOCKS:
            raise _invalid(f"Theta: logits must be [layers x {NUM_BLOCKS}], got shape {self.logits.shape}.")
        finite_rows = np.isfinite(self.logits.data).any(axis=1)
        if not finite_rows.all():
            raise _invalid(f"Theta: row {int(np.argmin(finite_rows))} has no admissible cell.")

    @property
    def values(self) -> np.ndarray:
        return self.logits.data

    @property
    def num_layers(self) -> int:
        return self.logits.shape[0]

    @property
    def admissible(self) -> np.ndarray:
        return np.isfinite(self.logits.data)

    def probabilities(self) -> np.ndarray:
        z = self.values - self.values.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def copy(self) -> "Theta":
        return Theta(Tensor(self.values, requires_grad=True))

    def __eq__(self, other):
        if not isinstance(other, Theta):
            return NotImplemented
        return np.array_equal(self.values, other.values)



@dataclass(frozen=True, slots=True)
class ChildNet(Serializable):
    choices: tuple[int, ...]
    arch: Optional[MacroArch] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))
        if self.arch is None:
            return
        if len(self.choices) != self.arch.num_layers:
            raise AdmissibilityError(
                f"ChildNet: {len(self.choices)} choices for an architecture with {self.arch.num_layers} TBS layers."
            )
        mask = self.arch.admissible_mask()
        for layer, choice in enumerate(self.choices):
            if not 0 <= choice < NUM_BLOCKS or not mask[layer, choice]:
                raise AdmissibilityError(f"ChildNet: block {choice} is not admissible in TBS layer {layer}.")

    def __str__(self):
        return ",".join(map(str, self.choices))




# ─────────────── training configuration ───────────────
@dataclass(frozen=True, slots=True, kw_only=True)
class OptimizerConfig(Serializable):
    kind: Literal["sgd", "adam"] = "sgd"
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    lr_schedule: Literal["cosine", "constant"] = "cosine"

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise _invalid(f"OptimizerConfig: unknown optimizer kind {self.kind!r}.")
        if self.lr_schedule not in ("cosine", "constant"):
            raise _invalid(f"OptimizerConfig: unknown lr_schedule {self.lr_schedule!r}.")
        if self.lr <= 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise _invalid(f"OptimizerConfig: invalid lr/momentum/weight_decay in {self}.")



def _default_w_optimizer():
    return OptimizerConfig(kind="sgd", lr=0.1, momentum=0.9, weight_decay=1e-4, lr_schedule="cosine")


def _default_theta_optimizer():
    return OptimizerConfig(kind="adam", lr=1e-2, weight_decay=5e-4, betas=(0.9, 0.999), lr_schedule="constant")



@dataclass(frozen=True, slots=True, kw_only=True)
class SearchConfig(Serializable):
    epochs: int = 90
    warmup_epochs: int = 10
    batch_size: int = 256
    split: float = 0.8
    w_optimizer: OptimizerConfig = field(default_factory=_default_w_optimizer)
    theta_optimizer: OptimizerConfig = field(default_factory=_default_theta_optimizer)
    tau_init: float = 5.0
    tau_min: float = 0.1
    tau_schedule: Literal["cosine"] = "cosine"
    seed: int = 0
    knobs: LossKnobs = field(default_factory=LossKnobs)
    log_dir: Optional[Path] = None
    strict: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise _invalid(f"SearchConfig: epochs must be >= 1, got {self.epochs}.")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise _invalid(
                f"SearchConfig: warmup_epochs ({self.warmup_epochs}) must be in [0, epochs={self.epochs})."
            )
        if not 0 < self.split < 1:
            raise _invalid(f"SearchConfig: split must lie in (0, 1), got {self.split}.")
        if self.batch_size < 1:
            raise _invalid(f"SearchConfig: batch_size must be >= 1, got {self.batch_size}.")
        if self.tau_min <= 0 or self.tau_init < self.tau_min:
            raise _invalid(f"SearchConfig: need 0 < tau_min <= tau_init, got {self.tau_min} and {self.tau_init}.")
        if self.tau_schedule != "cosine":
            raise _invalid(f"SearchConfig: unknown tau_schedule {self.tau_schedule!r}.")
        if self.log_dir is not None:
            object.__setattr__(self, "log_dir", Path(self.log_dir))

    @classmethod
    def desk(cls, **overrides) -> "SearchConfig":
        base = {"epochs": 20, "warmup_epochs": 4, "batch_size": 64}
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "SearchConfig":
        return replace(self, **changes)




# ─────────────── logs and records ───────────────
@dataclass(frozen=True, slots=True)
class PhaseStats(Serializable):
    phase: Literal["weights", "theta"]
    ce: float
    lat: float
    ener: float
    total: float
    acc: float
    batches: int = 0



@dataclass(frozen=True, slots=True)
class EpochLog(Serializable):
    epoch: int
    tau: float
    lr: float
    weights: PhaseStats
    theta: Optional[PhaseStats] = None
    theta_path: Optional[Path] = None
    child_choices: tuple[int, ...] = ()
    child_latency: float = math.nan
    child_energy: float = math.nan

    @property
    def phases(self) -> tuple[PhaseStats, ...]:
        return (self.weights,) if self.theta is None else (self.weights, self.theta)



@dataclass(frozen=True, slots=True)
class DominanceLabel(Serializable):
    label: Literal["energy-dominant", "latency-dominant"]
    ratio: float

    @property
    def latency_dominance(self) -> float:
        return math.inf if self.ratio == 0 else 1.0 / self.ratio



@dataclass(frozen=True, slots=True, kw_only=True)
class ModelRecord(Serializable):
    model_id: int
    knobs: LossKnobs
    accuracy: float
    latency: float
    energy: float
    vlat: float = math.nan
    vener: float = math.nan
    choices: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise _invalid(f"ModelRecord {self.model_id}: accuracy {self.accuracy} is outside [0, 1].")
        if not self.latency > 0 or not self.energy >= 0:
            raise _invalid(
                f"ModelRecord {self.model_id}: latency must be > 0 and energy >= 0, "
                f"got {self.latency} and {self.energy}."
            )
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))

    @property
    def accuracy_per_latency(self) -> float:
        return self.accuracy / self.latency
