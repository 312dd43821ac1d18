"""Pydantic models for configuration, threat models and recorded results."""

import math
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, InstanceOf, field_validator, model_validator

from src.models.domain import BinaryParams, ModelParams, MulticlassParams


class AttackMode(str, Enum):
    UNTARGETED = "untargeted"
    TARGETED = "targeted"


class SelectionRule(str, Enum):
    BENEFIT = "benefit"
    PAPER_LITERAL = "paper_literal"
    RANDOM = "random"

    @classmethod
    def parse(cls, raw: Union[str, "SelectionRule"]) -> "SelectionRule":
        if isinstance(raw, SelectionRule):
            return raw
        return cls(str(raw).strip().lower().replace("-", "_"))


def _check_fraction(name: str, value: float) -> float:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


# ---------------------------------------------------------------------------
# Training / attack configuration
# ---------------------------------------------------------------------------

class SgdConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # 0 is accepted so "no movement" runs can be expressed
    learning_rate: float = Field(default=0.001, ge=0.0)
    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=200, ge=1)


class AttackConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: AttackMode = AttackMode.UNTARGETED
    target: Optional[Union[InstanceOf[BinaryParams], InstanceOf[MulticlassParams]]] = None
    local_budget_b: float = 0.0
    selection_rule: SelectionRule = SelectionRule.BENEFIT

    @field_validator("local_budget_b")
    @classmethod
    def _budget_range(cls, v: float) -> float:
        return _check_fraction("local_budget_b", v)

    @field_validator("selection_rule", mode="before")
    @classmethod
    def _normalise_rule(cls, v):
        return SelectionRule.parse(v)

    @model_validator(mode="after")
    def _target_when_targeted(self) -> "AttackConfig":
        if self.mode == AttackMode.TARGETED and self.target is None:
            raise ValueError("targeted mode requires target parameters")
        return self


class ThreatModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    write_access_k: float = 0.0
    local_budget_b: float = 0.0
    attack: AttackConfig = Field(default_factory=AttackConfig)
    fixed_attacker_subset: bool = False

    @field_validator("write_access_k", "local_budget_b")
    @classmethod
    def _fraction(cls, v: float, info) -> float:
        return _check_fraction(info.field_name, v)

    @model_validator(mode="after")
    def _consistent_budget(self) -> "ThreatModel":
        if self.attack.local_budget_b != self.local_budget_b:
            raise ValueError(
                f"attack.local_budget_b={self.attack.local_budget_b} differs from "
                f"local_budget_b={self.local_budget_b}"
            )
        return self

    @property
    def global_budget(self) -> float:
        return self.write_access_k * self.local_budget_b

    @property
    def target(self) -> Optional[ModelParams]:
        return self.attack.target

    @classmethod
    def build(
        cls,
        k: float,
        b: float,
        mode: AttackMode = AttackMode.UNTARGETED,
        target: Optional[ModelParams] = None,
        selection_rule: Union[str, SelectionRule] = SelectionRule.BENEFIT,
        fixed_attacker_subset: bool = False,
    ) -> "ThreatModel":
        attack = AttackConfig(
            mode=mode, target=target, local_budget_b=b, selection_rule=selection_rule,
        )
        return cls(
            write_access_k=k, local_budget_b=b, attack=attack,
            fixed_attacker_subset=fixed_attacker_subset,
        )


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_per_class: int = Field(default=200, ge=1)
    test_per_class: int = Field(default=100, ge=1)
    dim: int = Field(default=2, ge=1)
    num_classes: int = Field(default=2, ge=2)
    separation: float = Field(default=3.0, ge=0.0)
    seed: int = 0


_SOURCE_CLASSES = {"mnist": 10, "cifar10": 10}


class DatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    source: Literal["mnist", "cifar10", "synthetic"] = "synthetic"
    class_filter: Optional[Tuple[int, int]] = None
    pixel_scale: Literal["raw", "unit"] = "raw"
    # mnist: train_images/train_labels/test_images/test_labels
    # cifar10: train_batches/test_batches
    paths: Dict[str, Union[str, List[str]]] = Field(default_factory=dict)
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)

    @property
    def source_classes(self) -> int:
        return _SOURCE_CLASSES.get(self.source, self.synthetic.num_classes)

    @model_validator(mode="after")
    def _check_filter(self) -> "DatasetSpec":
        if self.class_filter is not None:
            a, b = self.class_filter
            if a == b:
                raise ValueError(f"class_filter classes must be distinct, got ({a}, {b})")
            for c in (a, b):
                if not 0 <= c < self.source_classes:
                    raise ValueError(
                        f"class_filter class {c} outside [0, {self.source_classes}) for {self.source}"
                    )
        return self


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    k_values: List[float] = Field(default_factory=lambda: [0.0])
    b_values: List[float] = Field(default_factory=lambda: [0.0])
    modes: List[AttackMode] = Field(default_factory=lambda: [AttackMode.UNTARGETED])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4, 5])
    sgd: SgdConfig = Field(default_factory=SgdConfig)
    selection_rule: SelectionRule = SelectionRule.BENEFIT
    avg_window: int = Field(default=20, ge=1)
    std_window: int = Field(default=10, ge=1)
    fixed_attacker_subset: bool = False
    model: Literal["auto", "binary", "multiclass"] = "auto"
    target_remap: Literal["auto", "swap", "cyclic", "identity"] = "auto"
    target_seed: int = 0

    @field_validator("selection_rule", mode="before")
    @classmethod
    def _normalise_rule(cls, v):
        return SelectionRule.parse(v)

    @field_validator("k_values", "b_values")
    @classmethod
    def _grid(cls, v: List[float], info) -> List[float]:
        if not v:
            raise ValueError(f"{info.field_name} must not be empty")
        for value in v:
            _check_fraction(info.field_name, value)
        return v

    @field_validator("modes", "seeds")
    @classmethod
    def _non_empty(cls, v, info):
        if not v:
            raise ValueError(f"{info.field_name} must not be empty")
        if len(set(v)) != len(v):
            raise ValueError(f"{info.field_name} contains duplicates")
        return v

    @model_validator(mode="after")
    def _windows_fit(self) -> "SweepConfig":
        for name in ("avg_window", "std_window"):
            if getattr(self, name) > self.sgd.epochs:
                raise ValueError(f"{name}={getattr(self, name)} exceeds epochs={self.sgd.epochs}")
        return self

    @property
    def n_cells(self) -> int:
        return len(self.k_values) * len(self.b_values) * len(self.modes)


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

class EpochRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    epoch: int = Field(ge=1)
    test_accuracy: float = Field(ge=0.0, le=1.0)
    train_loss: float
    flips_used: int = Field(ge=0)
    attack_objective: float
    honest_objective: float
    target_distance: Optional[float] = None


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: AttackMode
    k: float
    b: float
    global_budget: float
    mean_acc_last_w: float
    std_across_seeds: float = Field(ge=0.0)
    mean_final_target_distance: Optional[float] = None
    n_seeds: int = Field(ge=1)

    @model_validator(mode="after")
    def _budget_product(self) -> "SweepRow":
        if abs(self.global_budget - self.k * self.b) > 1e-12:
            raise ValueError(f"global_budget {self.global_budget} != k*b {self.k * self.b}")
        return self

    @property
    def sort_key(self) -> Tuple[str, float, float]:
        return (self.mode.value, self.k, self.b)


class OracleCheckReport(BaseModel):
    instances: int
    binary_instances: int
    multiclass_instances: int
    max_gap: float
    failures: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures
