"""Hyperparameter models for layers and networks"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.shared.config import settings


class ActivationKind(str, Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


class SolverKind(str, Enum):
    MOD = "mod"
    MULTIPLICATIVE = "multiplicative"


class CoderKind(str, Enum):
    RIDGE_LS = "ridge_ls"
    OMP = "omp"


class Variant(str, Enum):
    DDNN1 = "ddnn1"
    DDNN2 = "ddnn2"
    DDNN_BINARY = "ddnn_binary"


class NormalizationMode(str, Enum):
    NONE = "none"
    UNIT_SCALE = "unit_scale"
    PER_FEATURE_STANDARDIZE = "per_feature_standardize"
    SQUASH_TO_ACTIVATION_RANGE = "squash_to_activation_range"


class _FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class LayerSpec(_FrozenModel):
    """Unsupervised dictionary layer"""
    atoms: int = Field(..., ge=1, description="Dictionary atoms K")
    solver: SolverKind = Field(default=SolverKind(settings.solver))
    coder: CoderKind = Field(default=CoderKind(settings.coder))
    sparsity: int = Field(default=settings.sparsity, ge=1, description="Nonzeros per code column (omp)")
    ridge: float = Field(default=settings.ridge, ge=0.0)
    max_iters: int = Field(default=settings.max_iters, ge=1)
    tol: float = Field(default=settings.tol, gt=0.0, description="Relative objective change")
    seed: int = Field(default=settings.seed, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "LayerSpec":
        if self.sparsity > self.atoms:
            raise ValueError(f"sparsity {self.sparsity} exceeds atoms {self.atoms}")
        if self.solver is SolverKind.MULTIPLICATIVE and self.coder is CoderKind.OMP:
            raise ValueError("multiplicative solver needs nonnegative codes; omp coder not allowed")
        return self


class LogisticLayerSpec(_FrozenModel):
    """Supervised binary layer with a logistic classification term"""
    atoms: int = Field(..., ge=1)
    lam: float = Field(default=settings.lam, gt=0.0, description="Classification weight")
    step: float = Field(default=settings.logistic_step, gt=0.0, description="Initial gradient step")
    inner_iters: int = Field(default=settings.logistic_inner_iters, ge=1)
    max_iters: int = Field(default=settings.max_iters, ge=1)
    ridge: float = Field(default=settings.ridge, ge=0.0)
    tol: float = Field(default=settings.tol, gt=0.0)
    seed: int = Field(default=settings.seed, ge=0)


class ClassDictSpec(_FrozenModel):
    """Class-specific plus shared dictionaries with mutual incoherence"""
    classes: int = Field(..., ge=1)
    atoms_per_class: int = Field(..., ge=1)
    shared_atoms: int = Field(default=0, ge=0)
    eta: float = Field(default=settings.eta, ge=0.0)
    ridge: float = Field(default=settings.ridge, ge=0.0)
    tol: float = Field(default=settings.tol, gt=0.0)
    max_iters: int = Field(default=settings.max_iters, ge=1)
    seed: int = Field(default=settings.seed, ge=0)

    @property
    def total_atoms(self) -> int:
        return self.classes * self.atoms_per_class + self.shared_atoms

    @classmethod
    def uniform(cls, atoms: int, classes: int, **kwargs) -> "ClassDictSpec":
        """Split `atoms` into equal class blocks; the remainder becomes the shared block."""
        per_class = atoms // classes
        return cls(
            classes=classes,
            atoms_per_class=per_class,
            shared_atoms=atoms - classes * per_class,
            **kwargs,
        )


class InversionGuard(_FrozenModel):
    """Noise and clamping applied before an activation inverse"""
    clamp_margin: float = Field(default=settings.clamp_margin, gt=0.0)
    noise_sigma: float = Field(default=settings.noise_sigma, ge=0.0)
    seed: int = Field(default=settings.seed, ge=0)


class NetworkSpec(_FrozenModel):
    """Whole-network configuration; the last entry of `layers` is the final layer"""
    variant: Variant = Field(default=Variant(settings.variant))
    layers: List[LayerSpec] = Field(..., min_length=1)
    activation: ActivationKind = Field(default=ActivationKind(settings.activation))
    guard: InversionGuard = Field(default_factory=InversionGuard)
    final_mu: float = Field(default=settings.mu, ge=0.0)
    eta: float = Field(default=settings.eta, ge=0.0)
    lam: float = Field(default=settings.lam, gt=0.0)
    logistic_step: float = Field(default=settings.logistic_step, gt=0.0)
    logistic_inner_iters: int = Field(default=settings.logistic_inner_iters, ge=1)
    test_coder: CoderKind = Field(default=CoderKind.RIDGE_LS)
    test_sparsity: int = Field(default=settings.sparsity, ge=1)
    test_ridge: Optional[float] = Field(default=None, ge=0.0, description="Defaults to each layer's ridge")
    seed: int = Field(default=settings.seed, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "NetworkSpec":
        if self.activation is not ActivationKind.IDENTITY:
            half_width = 1.0 if self.activation is ActivationKind.TANH else 0.5
            if self.guard.clamp_margin >= half_width:
                raise ValueError(
                    f"clamp_margin {self.guard.clamp_margin} must be below {half_width} for {self.activation.value}"
                )
        if self.test_coder is CoderKind.OMP and self.test_sparsity > min(s.atoms for s in self.layers):
            raise ValueError("test_sparsity exceeds the atom count of some layer")
        return self

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def atoms(self) -> List[int]:
        return [layer.atoms for layer in self.layers]
