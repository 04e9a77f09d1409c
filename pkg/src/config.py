"""
Configuration models with validation.

Uses Pydantic for type checking and validation of model/training/experiment
configs. Training defaults are lr 2e-5, 10 epochs, dropout 0.1, batch 16 and no L2.
The encoder defaults are sized to train on a CPU.
"""

from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from .errors import ConfigurationError


class TaskMode(str, Enum):
    """Which classification heads sit on top of the shared encoder."""

    ST_SATD = "ST_SATD"
    ST_VULN = "ST_VULN"
    MULTI = "MULTI"

    @property
    def tasks(self) -> Tuple[str, ...]:
        if self is TaskMode.ST_SATD:
            return ("satd",)
        if self is TaskMode.ST_VULN:
            return ("vuln",)
        return ("satd", "vuln")


class InputMode(str, Enum):
    """IN keeps internal comments in the code; OUT moves them to the comment segment."""

    IN = "IN"
    OUT = "OUT"


class LossMode(str, Enum):
    REGULAR = "regular"
    WEIGHTED = "weighted"


class ModelConfig(BaseModel):
    """Encoder shape and head layout (desk-scale defaults)."""

    vocab_size: int = Field(default=8000, gt=0)
    hidden: int = Field(default=128, gt=0)
    layers: int = Field(default=4, gt=0)
    heads: int = Field(default=4, gt=0)
    ffn_multiplier: int = Field(default=4, gt=0)
    max_len: int = Field(default=512, gt=3)
    dropout: float = Field(default=0.1, ge=0, lt=1)
    task_mode: TaskMode = Field(default=TaskMode.MULTI)
    seed: int = Field(default=42, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _heads_divide_hidden(self) -> "ModelConfig":
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        return self


class TrainConfig(BaseModel):
    """Training hyper-parameters."""

    learning_rate: float = Field(default=2e-5, ge=0)
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=16, ge=1)
    l2_lambda: float = Field(default=0.0, ge=0)
    weighted_loss: bool = Field(default=False)
    split: Tuple[float, float, float] = Field(default=(0.8, 0.1, 0.1))
    stratify: bool = Field(default=False)
    task_loss_weights: Tuple[float, float] = Field(default=(1.0, 1.0))
    seed: int = Field(default=42, ge=0, lt=2**64)

    @field_validator("split")
    @classmethod
    def _split_fractions(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(f <= 0 for f in value):
            raise ValueError(f"split fractions must be positive, got {value}")
        if abs(sum(value) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(value)}")
        return value

    @field_validator("task_loss_weights")
    @classmethod
    def _loss_weights(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if any(w < 0 for w in value):
            raise ValueError(f"task loss weights must be non-negative, got {value}")
        return value


class TokenizerConfig(BaseModel):
    """BPE vocabulary size and the content budget shared by comment and code."""

    vocab_size: int = Field(default=8000, gt=0)
    budget: int = Field(default=509, ge=2)


class ExperimentConfig(BaseModel):
    """Declarative description of one experiment run (loaded from a JSON file)."""

    name: str = Field(default="vulsatd")
    datasets: List[Path] = Field(default_factory=list)
    output_dir: Path = Field(default=Path("runs"))
    approaches: List[TaskMode] = Field(default_factory=lambda: [TaskMode.MULTI, TaskMode.ST_SATD, TaskMode.ST_VULN])
    loss_modes: List[LossMode] = Field(default_factory=lambda: [LossMode.REGULAR, LossMode.WEIGHTED])
    input_modes: List[InputMode] = Field(default_factory=lambda: [InputMode.OUT])
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    tokenizer: TokenizerConfig = Field(default_factory=TokenizerConfig)
    # Declared alternatives; the one with the best validation F1 is kept.
    train_grid: List[TrainConfig] = Field(default_factory=list)
    bench_runs: int = Field(default=3, ge=1)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _budget_fits(self) -> "ExperimentConfig":
        if self.model.max_len < self.tokenizer.budget + 3:
            raise ValueError(
                f"model.max_len ({self.model.max_len}) must be >= tokenizer.budget + 3 "
                f"({self.tokenizer.budget + 3})"
            )
        return self


def load_experiment_config(path: Optional[Path]) -> ExperimentConfig:
    """Load an ExperimentConfig from JSON, or return defaults when path is None."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        return ExperimentConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigurationError(f"invalid config {path}: {e}") from e


# Default configurations
DEFAULT_MODEL_CONFIG = ModelConfig()
DEFAULT_TRAIN_CONFIG = TrainConfig()
DEFAULT_TOKENIZER_CONFIG = TokenizerConfig()
