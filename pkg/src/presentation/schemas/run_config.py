from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.data_access.models.spec_model import ActivationKind, CoderKind, NormalizationMode, SolverKind, Variant
from src.shared.config import settings
from src.shared.exceptions import ConfigError, DatasetIOError


class CommandEnum(str, Enum):
    TRAIN = "train"
    EVAL = "eval"
    PREDICT = "predict"
    INSPECT = "inspect"


class MetricsFormat(str, Enum):
    TABLE = "table"
    CSV = "csv"


# flag that must be present for each command
_REQUIRED = {
    CommandEnum.TRAIN: ("data", "model"),
    CommandEnum.EVAL: ("data", "model"),
    CommandEnum.PREDICT: ("data", "model"),
    CommandEnum.INSPECT: ("model",),
}


class RunConfig(BaseModel):
    """One CLI invocation; every field but the paths has a default"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    command: CommandEnum
    data: Optional[str] = Field(None, description="CSV file, or IDX images file")
    labels: Optional[str] = Field(None, description="IDX labels file")
    model: Optional[str] = Field(None, description="Model file to write (train) or read")
    out: Optional[str] = Field(None, description="Prediction output file; stdout when absent")
    scores: Optional[str] = Field(None, description="CSV file receiving the C x n score matrix")
    label_column: str = Field(default=settings.label_column)

    variant: Variant = Field(default=Variant(settings.variant))
    atoms: Optional[List[int]] = Field(None, description="Atoms per layer; default [d, d/2, d/4]")
    activation: ActivationKind = Field(default=ActivationKind(settings.activation))
    delta: float = Field(default=settings.clamp_margin, gt=0.0, description="Clamp margin before inversion")
    sigma: float = Field(default=settings.noise_sigma, ge=0.0, description="Inversion noise level")
    mu: float = Field(default=settings.mu, ge=0.0)
    eta: float = Field(default=settings.eta, ge=0.0)
    lam: float = Field(default=settings.lam, gt=0.0, alias="lambda")
    sparsity: int = Field(default=settings.sparsity, ge=1)
    solver: SolverKind = Field(default=SolverKind(settings.solver))
    coder: CoderKind = Field(default=CoderKind(settings.coder))
    test_coder: CoderKind = Field(default=CoderKind.RIDGE_LS)
    iters: int = Field(default=settings.max_iters, ge=1)
    tol: float = Field(default=settings.tol, gt=0.0)
    ridge: float = Field(default=settings.ridge, ge=0.0)
    seed: int = Field(default=settings.seed, ge=0)
    normalize: NormalizationMode = Field(default=NormalizationMode(settings.normalization))

    format: MetricsFormat = Field(default=MetricsFormat(settings.metrics_format))
    metrics_file: Optional[str] = Field(default=settings.metrics_file)
    log_level: str = Field(default=settings.log_level)

    @field_validator("atoms", mode="before")
    @classmethod
    def _split_atoms(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("atoms")
    @classmethod
    def _positive_atoms(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None and (not value or min(value) < 1):
            raise ValueError("atoms must be a non-empty list of positive counts")
        return value

    @model_validator(mode="after")
    def _required_paths(self) -> "RunConfig":
        for name in _REQUIRED[self.command]:
            if getattr(self, name) is None:
                raise ValueError(f"--{name} is required for --{self.command.value}")
        return self

    def network_overrides(self) -> Dict[str, object]:
        """Keyword arguments for network_service.build_network_spec"""
        return {
            "atoms": self.atoms,
            "variant": self.variant,
            "activation": self.activation,
            "clamp_margin": self.delta,
            "noise_sigma": self.sigma,
            "mu": self.mu,
            "eta": self.eta,
            "lam": self.lam,
            "sparsity": self.sparsity,
            "solver": self.solver,
            "coder": self.coder,
            "max_iters": self.iters,
            "tol": self.tol,
            "ridge": self.ridge,
            "seed": self.seed,
            "test_coder": self.test_coder,
            "test_sparsity": self.sparsity,
        }


def parse_config_file(path: str) -> Dict[str, str]:
    """
    Flat `key = value` lines; keys are flag names without the leading dashes
    and come back as RunConfig field names (`lambda` becomes `lam`).
    Blank lines and lines starting with # are skipped.
    """
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DatasetIOError(path, f"cannot read config: {e.strerror or e}") from e

    field_of = {field.alias: name for name, field in RunConfig.model_fields.items() if field.alias}
    values: Dict[str, str] = {}
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{number}", "expected 'key = value'")
        key = key.strip().replace("-", "_")
        values[field_of.get(key, key)] = value.strip()
    return values


def build_run_config(values: Dict[str, object]) -> RunConfig:
    """Validate merged settings; the first failing field becomes a ConfigError naming the flag."""
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        loc = [str(part) for part in error["loc"]]
        key = f"--{loc[0].replace('_', '-')}" if loc else "config"
        message = error["msg"].removeprefix("Value error, ")
        raise ConfigError(key, message) from None
