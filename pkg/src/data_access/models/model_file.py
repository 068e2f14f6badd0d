"""Structured header of the binary model file"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.data_access.models.spec_model import ActivationKind, InversionGuard, Variant

MAGIC = b"DDNN"
FORMAT_VERSION = 1


class LayerHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str
    input_dim: int = Field(..., ge=1)
    atoms: int = Field(..., ge=1)
    samples: int = Field(..., ge=0)
    iterations: int = Field(..., ge=0)
    stop_reason: str
    bias: float = 0.0
    class_of_atom: Optional[List[int]] = None


class FinalHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input_dim: int = Field(..., ge=1)
    atoms: int = Field(..., ge=1)
    classes: int = Field(..., ge=1)
    samples: int = Field(..., ge=0)
    mu: float = Field(..., ge=0.0)
    has_w: bool
    iterations: int = Field(..., ge=0)
    stop_reason: str
    class_of_atom: List[int]


class ModelHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variant: Variant
    activation: ActivationKind
    guard: InversionGuard
    input_dim: int = Field(..., ge=1)
    layers: List[LayerHeader]
    final: FinalHeader
    class_labels: List[str]
    rng: str
    network_spec: Dict[str, Any]
    normalization: Optional[Dict[str, Any]] = None
    blocks: List[str] = Field(..., description="Matrix blocks in payload order")
