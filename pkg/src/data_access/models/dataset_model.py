from typing import Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from src.shared.exceptions import DimensionMismatchError, LabelDomainError
from src.shared.numerics import Matrix


@dataclass
class Dataset:
    """Samples as columns of X with labels remapped to 0..C-1"""
    X: Matrix
    labels: npt.NDArray[np.int64]
    class_values: Tuple[str, ...]  # original label value of every class index
    feature_names: Optional[List[str]] = None
    image_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.X.shape[1],):
            raise DimensionMismatchError("label count", self.X.shape[1], self.labels.size)
        bad = self.labels[(self.labels < 0) | (self.labels >= self.class_count)]
        if bad.size:
            raise LabelDomainError(int(bad[0]), f"[0, {self.class_count})")

    @property
    def class_count(self) -> int:
        return len(self.class_values)

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    @property
    def n_features(self) -> int:
        return self.X.shape[0]

    @property
    def label_mapping(self) -> Dict[str, int]:
        return {value: index for index, value in enumerate(self.class_values)}


def remap_labels(raw: Sequence[str]) -> Tuple[npt.NDArray[np.int64], Tuple[str, ...]]:
    """Map label values to 0..C-1 in first-appearance order."""
    mapping: Dict[str, int] = {}
    indices = np.empty(len(raw), dtype=np.int64)
    for i, value in enumerate(raw):
        if value not in mapping:
            mapping[value] = len(mapping)
        indices[i] = mapping[value]
    return indices, tuple(mapping)


@dataclass
class NormalizationParams:
    """Everything needed to replay a normalization on new data"""
    mode: str
    scale: float = 1.0
    offset: float = 0.0
    means: List[float] = field(default_factory=list)
    stds: List[float] = field(default_factory=list)
    passthrough_features: List[int] = field(default_factory=list)
    target_low: float = 0.0
    target_high: float = 0.0

    def to_dict(self) -> dict:
        return {
            'mode': self.mode,
            'scale': self.scale,
            'offset': self.offset,
            'means': list(self.means),
            'stds': list(self.stds),
            'passthrough_features': list(self.passthrough_features),
            'target_low': self.target_low,
            'target_high': self.target_high,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'NormalizationParams':
        return cls(
            mode=data['mode'],
            scale=data.get('scale', 1.0),
            offset=data.get('offset', 0.0),
            means=list(data.get('means', [])),
            stds=list(data.get('stds', [])),
            passthrough_features=list(data.get('passthrough_features', [])),
            target_low=data.get('target_low', 0.0),
            target_high=data.get('target_high', 0.0),
        )
